#pragma once

// Closed-form geometry on the three constant-curvature model spaces.
//
// Hyperbolic space is the upper sheet of the hyperboloid <x,x>_H = -1,
// x0 > 0 with the Minkowski form diag(-1, 1, ..., 1); the sphere is the unit
// sphere in R^{d+1}. Both use d+1 ambient coordinates. Euclidean space uses d
// plain coordinates. Moebius addition works in kappa-stereographic
// coordinates (Poincare ball for kappa = -1, projected sphere for kappa = +1);
// ambient_to_stereo / stereo_to_ambient move between the two charts.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fmgnn {

enum class manifold_kind { euclidean, hyperbolic, spherical };

constexpr double curvature(manifold_kind kind) noexcept {
    switch (kind) {
    case manifold_kind::euclidean: return 0.0;
    case manifold_kind::hyperbolic: return -1.0;
    case manifold_kind::spherical: return 1.0;
    }
    return 0.0;
}

/// Number of stored coordinates for an intrinsic dimension.
constexpr std::size_t ambient_dim(manifold_kind kind, std::size_t dim) noexcept {
    return kind == manifold_kind::euclidean ? dim : dim + 1;
}

std::string_view to_string(manifold_kind kind) noexcept;

namespace geometry {

/// Tolerances shared by the kernels.
inline constexpr double small_vector = 1e-12;    // exp/log removable singularity cutoff
inline constexpr double norm_floor = 1e-12;      // floor for norm denominators
inline constexpr double antipodal_margin = 1e-9; // sphere log undefined at <x,y> <= -1 + margin
inline constexpr double invariant_tol = 1e-9;

} // namespace geometry

struct manifold_point {
    manifold_kind kind = manifold_kind::euclidean;
    std::vector<double> coords;

    /// Intrinsic dimension d.
    std::size_t dim() const noexcept {
        return kind == manifold_kind::euclidean ? coords.size() : coords.size() - 1;
    }
};

struct tangent_vec {
    std::vector<double> coords;
    manifold_point base;
};

/// Metric inner product in ambient coordinates: Minkowski for hyperbolic,
/// dot product otherwise.
double inner(manifold_kind kind, std::span<const double> a, std::span<const double> b);

/// Manifold norm of a tangent vector. Negative Minkowski squares (off the
/// tangent space through drift) are clamped to zero.
double tangent_norm(manifold_kind kind, std::span<const double> v);

/// True when the point satisfies its model constraint within tol.
bool on_manifold(const manifold_point& x, double tol = geometry::invariant_tol);

/// True when v is tangent at its base within tol.
bool is_tangent(const tangent_vec& v, double tol = geometry::invariant_tol);

/// Snap a drifted point back onto the model: x0 = sqrt(1 + |x_{1:d}|^2) on
/// the hyperboloid, x / |x| on the sphere, nothing for Euclidean.
void reproject(manifold_point& x);

/// Orthogonal projection (in the manifold metric) of an ambient vector onto
/// the tangent space at base.
tangent_vec project_to_tangent(const manifold_point& base, std::span<const double> w);

manifold_point origin(manifold_kind kind, std::size_t dim);

/// Tangent vector at the origin whose coordinates in the origin's tangent
/// basis are `coords` (length d). For the hyperboloid and sphere the stored
/// ambient vector is (0, coords).
tangent_vec origin_tangent(manifold_kind kind, std::span<const double> coords);

/// Inverse of origin_tangent: the d tangent-basis coordinates.
std::vector<double> origin_tangent_coords(const tangent_vec& v);

enum class reprojection { apply, skip };

manifold_point exp_map(const manifold_point& base, const tangent_vec& v,
                       reprojection mode = reprojection::apply);

tangent_vec log_map(const manifold_point& base, const manifold_point& y);

double dist(const manifold_point& x, const manifold_point& y);

/// Moebius addition in kappa-stereographic coordinates.
std::vector<double> mobius_add(std::span<const double> x, std::span<const double> y, double kappa);

/// Stereographic projection from (-1, 0, ..., 0). Identity for Euclidean.
std::vector<double> ambient_to_stereo(const manifold_point& x);

manifold_point stereo_to_ambient(std::span<const double> u, manifold_kind kind);

} // namespace fmgnn

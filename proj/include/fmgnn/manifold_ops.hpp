#pragma once

// Differentiable, row-batched versions of the origin-based manifold maps.
// Each row of a tensor is one point (ambient coordinates for hyperbolic and
// spherical, plain coordinates for Euclidean) or one origin-tangent vector
// (intrinsic coordinates, length d).

#include "fmgnn/autodiff/ops.hpp"
#include "fmgnn/manifold.hpp"

namespace fmgnn {

/// Largest hyperbolic distance from the origin that exp0 produces.
inline constexpr double hyperbolic_radius_limit = 50.0;

/// Rows of origin-tangent coordinates -> points. Hyperbolic rows are
/// re-projected via x0 = sqrt(1 + |x_1:|^2), sphere rows via x / |x|.
/// Hyperbolic rows longer than hyperbolic_radius_limit are first shortened
/// to it (the scale factor is treated as a constant).
ad::tensor exp0(manifold_kind kind, const ad::tensor& v);

/// Points -> origin-tangent coordinates.
ad::tensor log0(manifold_kind kind, const ad::tensor& x);

/// Ambient rows -> stereographic rows (projection from (-1, 0, ..., 0)).
ad::tensor to_stereo(manifold_kind kind, const ad::tensor& x);

/// Stereographic rows -> ambient rows. Hyperbolic rows need |u| < 1.
ad::tensor from_stereo(manifold_kind kind, const ad::tensor& u);

/// Row-wise Moebius addition in kappa-stereographic coordinates.
ad::tensor mobius_add(const ad::tensor& x, const ad::tensor& y, double kappa);

/// Moebius addition of ambient rows, x (+) y, without passing through
/// stereographic coordinates: the boost (hyperbolic) or rotation (sphere)
/// in the plane of the origin and x that carries the origin to x, applied
/// to y. Equal to from_stereo(mobius_add(to_stereo(x), to_stereo(y))) but
/// free of the ball boundary and of the sphere's stereographic pole in y.
/// Sphere rows of x at the pole use the floored denominator 1e-12.
ad::tensor gyro_add(manifold_kind kind, const ad::tensor& x, const ad::tensor& y);

/// Lower bound applied inside the distance derivatives.
inline constexpr double distance_gradient_floor = 1e-9;

/// n x k matrix of manifold distances between the rows of x and the rows of
/// the constant point set c.
ad::tensor distance_matrix(manifold_kind kind, const ad::tensor& x, const ad::tensor& c);

/// Largest deviation of any row from the manifold constraint (0 for
/// Euclidean; also counts lower-sheet hyperbolic rows as violations).
double max_constraint_violation(manifold_kind kind, const ad::tensor& x);

} // namespace fmgnn

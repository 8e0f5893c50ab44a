#include "fmgnn/manifold.hpp"

#include "fmgnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fmgnn {

std::string_view to_string(manifold_kind kind) noexcept {
    switch (kind) {
    case manifold_kind::euclidean: return "euclidean";
    case manifold_kind::hyperbolic: return "hyperbolic";
    case manifold_kind::spherical: return "spherical";
    }
    return "unknown";
}

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* where) {
    if (a != b) {
        throw dimension_error(std::string(where) + ": length " + std::to_string(a) + " vs " +
                              std::to_string(b));
    }
}

void require_same_space(const manifold_point& x, const manifold_point& y, const char* where) {
    if (x.kind != y.kind) {
        throw dimension_error(std::string(where) + ": points live on different manifolds");
    }
    require_same_size(x.coords.size(), y.coords.size(), where);
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double spatial_norm_sq(std::span<const double> x) {
    return dot(x.subspan(1), x.subspan(1));
}

} // namespace

double inner(manifold_kind kind, std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "inner");
    if (kind == manifold_kind::hyperbolic) {
        if (a.empty()) return 0.0;
        return -a[0] * b[0] + dot(a.subspan(1), b.subspan(1));
    }
    return dot(a, b);
}

double tangent_norm(manifold_kind kind, std::span<const double> v) {
    return std::sqrt(std::max(inner(kind, v, v), 0.0));
}

bool on_manifold(const manifold_point& x, double tol) {
    switch (x.kind) {
    case manifold_kind::euclidean:
        return std::all_of(x.coords.begin(), x.coords.end(), [](double c) { return std::isfinite(c); });
    case manifold_kind::hyperbolic:
        return x.coords.size() >= 2 && x.coords[0] > 0.0 &&
               std::abs(inner(x.kind, x.coords, x.coords) + 1.0) <= tol;
    case manifold_kind::spherical:
        return x.coords.size() >= 2 && std::abs(inner(x.kind, x.coords, x.coords) - 1.0) <= tol;
    }
    return false;
}

bool is_tangent(const tangent_vec& v, double tol) {
    if (v.coords.size() != v.base.coords.size()) return false;
    if (v.base.kind == manifold_kind::euclidean) return true;
    return std::abs(inner(v.base.kind, v.base.coords, v.coords)) <= tol;
}

void reproject(manifold_point& x) {
    switch (x.kind) {
    case manifold_kind::euclidean: return;
    case manifold_kind::hyperbolic:
        x.coords[0] = std::sqrt(1.0 + spatial_norm_sq(x.coords));
        return;
    case manifold_kind::spherical: {
        const double n = std::sqrt(dot(x.coords, x.coords));
        if (n < geometry::norm_floor) {
            throw numerical_error("reproject: sphere point collapsed to zero");
        }
        for (double& c : x.coords) c /= n;
        return;
    }
    }
}

tangent_vec project_to_tangent(const manifold_point& base, std::span<const double> w) {
    require_same_size(base.coords.size(), w.size(), "project_to_tangent");
    tangent_vec v{std::vector<double>(w.begin(), w.end()), base};
    switch (base.kind) {
    case manifold_kind::euclidean: break;
    case manifold_kind::hyperbolic: {
        // <x,x>_H = -1, so adding <x,w>_H x removes the normal component.
        const double c = inner(base.kind, base.coords, w);
        for (std::size_t i = 0; i < w.size(); ++i) v.coords[i] += c * base.coords[i];
        break;
    }
    case manifold_kind::spherical: {
        const double c = inner(base.kind, base.coords, w);
        for (std::size_t i = 0; i < w.size(); ++i) v.coords[i] -= c * base.coords[i];
        break;
    }
    }
    return v;
}

manifold_point origin(manifold_kind kind, std::size_t dim) {
    if (dim == 0) {
        throw dimension_error("origin: dimension must be at least 1");
    }
    manifold_point o{kind, std::vector<double>(ambient_dim(kind, dim), 0.0)};
    if (kind != manifold_kind::euclidean) o.coords[0] = 1.0;
    return o;
}

tangent_vec origin_tangent(manifold_kind kind, std::span<const double> coords) {
    tangent_vec v{{}, origin(kind, coords.size())};
    if (kind == manifold_kind::euclidean) {
        v.coords.assign(coords.begin(), coords.end());
    } else {
        v.coords.assign(coords.size() + 1, 0.0);
        std::copy(coords.begin(), coords.end(), v.coords.begin() + 1);
    }
    return v;
}

std::vector<double> origin_tangent_coords(const tangent_vec& v) {
    if (v.base.kind == manifold_kind::euclidean) return v.coords;
    return {v.coords.begin() + 1, v.coords.end()};
}

manifold_point exp_map(const manifold_point& base, const tangent_vec& v, reprojection mode) {
    require_same_size(base.coords.size(), v.coords.size(), "exp_map");
    if (base.kind != v.base.kind) {
        throw dimension_error("exp_map: tangent vector belongs to a different manifold");
    }
    manifold_point out{base.kind, base.coords};
    if (base.kind == manifold_kind::euclidean) {
        for (std::size_t i = 0; i < out.coords.size(); ++i) out.coords[i] += v.coords[i];
        return out;
    }

    const double n = tangent_norm(base.kind, v.coords);
    if (n < geometry::small_vector) return out;

    double a = 0.0;
    double b = 0.0;
    if (base.kind == manifold_kind::hyperbolic) {
        a = std::cosh(n);
        b = std::sinh(n) / n;
    } else {
        a = std::cos(n);
        b = std::sin(n) / n;
    }
    for (std::size_t i = 0; i < out.coords.size(); ++i) {
        out.coords[i] = a * base.coords[i] + b * v.coords[i];
    }
    if (mode == reprojection::apply) reproject(out);
    return out;
}

tangent_vec log_map(const manifold_point& base, const manifold_point& y) {
    require_same_space(base, y, "log_map");
    tangent_vec v{std::vector<double>(base.coords.size(), 0.0), base};
    if (base.kind == manifold_kind::euclidean) {
        for (std::size_t i = 0; i < v.coords.size(); ++i) v.coords[i] = y.coords[i] - base.coords[i];
        return v;
    }

    const double xy = inner(base.kind, base.coords, y.coords);
    if (base.kind == manifold_kind::spherical && xy <= -1.0 + geometry::antipodal_margin) {
        throw domain_error("log_map: antipodal points on the sphere have no unique logarithm");
    }
    const double d = dist(base, y);
    if (d < geometry::small_vector) return v;

    // Hyperbolic: u = y + <x,y>_H x.  Spherical: u = y - <x,y> x.
    const double sign = base.kind == manifold_kind::hyperbolic ? 1.0 : -1.0;
    for (std::size_t i = 0; i < v.coords.size(); ++i) {
        v.coords[i] = y.coords[i] + sign * xy * base.coords[i];
    }
    const double un = std::max(tangent_norm(base.kind, v.coords), geometry::norm_floor);
    for (double& c : v.coords) c *= d / un;
    return v;
}

double dist(const manifold_point& x, const manifold_point& y) {
    require_same_space(x, y, "dist");
    switch (x.kind) {
    case manifold_kind::euclidean: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.coords.size(); ++i) {
            const double d = x.coords[i] - y.coords[i];
            s += d * d;
        }
        return std::sqrt(s);
    }
    case manifold_kind::hyperbolic:
        return std::acosh(std::max(-inner(x.kind, x.coords, y.coords), 1.0));
    case manifold_kind::spherical:
        return std::acos(std::clamp(inner(x.kind, x.coords, y.coords), -1.0, 1.0));
    }
    return 0.0;
}

std::vector<double> mobius_add(std::span<const double> x, std::span<const double> y, double kappa) {
    require_same_size(x.size(), y.size(), "mobius_add");
    const double xy = dot(x, y);
    const double x2 = dot(x, x);
    const double y2 = dot(y, y);
    if (kappa < 0.0) {
        const double radius_sq = 1.0 / -kappa;
        if (x2 >= radius_sq || y2 >= radius_sq) {
            throw domain_error("mobius_add: operand outside the Poincare ball");
        }
    }
    const double denom = 1.0 - 2.0 * kappa * xy + kappa * kappa * x2 * y2;
    if (std::abs(denom) < 1e-12) {
        throw numerical_error("mobius_add: vanishing denominator");
    }
    const double cx = 1.0 - 2.0 * kappa * xy - kappa * y2;
    const double cy = 1.0 + kappa * x2;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (cx * x[i] + cy * y[i]) / denom;
    return out;
}

std::vector<double> ambient_to_stereo(const manifold_point& x) {
    if (x.kind == manifold_kind::euclidean) return x.coords;
    const double denom = 1.0 + x.coords[0];
    if (x.kind == manifold_kind::spherical && denom < 1e-12) {
        throw domain_error("ambient_to_stereo: point is the projection pole (-1, 0, ..., 0)");
    }
    if (x.kind == manifold_kind::hyperbolic && x.coords[0] <= 0.0) {
        throw domain_error("ambient_to_stereo: point is not on the upper hyperboloid sheet");
    }
    std::vector<double> u(x.coords.begin() + 1, x.coords.end());
    for (double& c : u) c /= denom;
    return u;
}

manifold_point stereo_to_ambient(std::span<const double> u, manifold_kind kind) {
    if (kind == manifold_kind::euclidean) {
        return {kind, std::vector<double>(u.begin(), u.end())};
    }
    const double n2 = dot(u, u);
    manifold_point x{kind, std::vector<double>(u.size() + 1)};
    if (kind == manifold_kind::hyperbolic) {
        if (n2 >= 1.0) {
            throw domain_error("stereo_to_ambient: point lies outside the unit ball");
        }
        const double s = 1.0 - n2;
        x.coords[0] = (1.0 + n2) / s;
        for (std::size_t i = 0; i < u.size(); ++i) x.coords[i + 1] = 2.0 * u[i] / s;
    } else {
        const double s = 1.0 + n2;
        x.coords[0] = (1.0 - n2) / s;
        for (std::size_t i = 0; i < u.size(); ++i) x.coords[i + 1] = 2.0 * u[i] / s;
    }
    return x;
}

} // namespace fmgnn

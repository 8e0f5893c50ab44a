#include "fmgnn/manifold_ops.hpp"

#include "fmgnn/errors.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fmgnn {

using namespace ad;

namespace {

void require_ambient(const tensor& x, const char* op) {
    if (x.cols() < 2) throw dimension_error(std::string(op) + ": ambient rows need at least two coordinates");
}

tensor spatial(const tensor& x) { return slice_cols(x, 1, x.cols()); }
tensor time_part(const tensor& x) { return slice_cols(x, 0, 1); }

// Rows longer than r_max rescaled onto it; the tensor itself when none are.
tensor cap_rows(const tensor& v, double r_max) {
    std::vector<double> factor;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double n2 = 0.0;
        for (std::size_t j = 0; j < v.cols(); ++j) n2 += v(i, j) * v(i, j);
        if (n2 > r_max * r_max) {
            if (factor.empty()) factor.assign(v.rows(), 1.0);
            factor[i] = r_max / std::sqrt(n2);
        }
    }
    if (factor.empty()) return v;
    return v * tensor({v.rows(), 1}, std::move(factor));
}

} // namespace

tensor exp0(manifold_kind kind, const tensor& v) {
    switch (kind) {
    case manifold_kind::euclidean: return v;
    case manifold_kind::hyperbolic: {
        const tensor c = cap_rows(v, hyperbolic_radius_limit);
        const tensor s = row_sq_norm(c);
        const tensor sp = sinhc_sqrt(s) * c;
        return concat_cols({sqrt(row_sq_norm(sp) + 1.0), sp});
    }
    case manifold_kind::spherical: {
        const tensor s = row_sq_norm(v);
        const tensor y = concat_cols({cos_sqrt(s), sinc_sqrt(s) * v});
        return y / sqrt(row_sq_norm(y));
    }
    }
    return v;
}

tensor log0(manifold_kind kind, const tensor& x) {
    switch (kind) {
    case manifold_kind::euclidean: return x;
    case manifold_kind::hyperbolic: {
        require_ambient(x, "log0");
        const tensor sp = spatial(x);
        return asinhc_sqrt(row_sq_norm(sp)) * sp;
    }
    case manifold_kind::spherical: {
        require_ambient(x, "log0");
        const tensor sp = spatial(x);
        return atan2_ratio(row_sq_norm(sp), time_part(x)) * sp;
    }
    }
    return x;
}

tensor to_stereo(manifold_kind kind, const tensor& x) {
    if (kind == manifold_kind::euclidean) return x;
    require_ambient(x, "to_stereo");
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (kind == manifold_kind::spherical && 1.0 + x(i, 0) < 1e-12) {
            throw domain_error("to_stereo: row " + std::to_string(i) + " is the projection pole");
        }
        if (kind == manifold_kind::hyperbolic && x(i, 0) <= 0.0) {
            throw domain_error("to_stereo: row " + std::to_string(i) + " is not on the upper sheet");
        }
    }
    return spatial(x) / (time_part(x) + 1.0);
}

tensor from_stereo(manifold_kind kind, const tensor& u) {
    if (kind == manifold_kind::euclidean) return u;
    const tensor n2 = row_sq_norm(u);
    if (kind == manifold_kind::hyperbolic) {
        for (std::size_t i = 0; i < u.rows(); ++i) {
            if (n2(i, 0) >= 1.0) throw domain_error("from_stereo: row " + std::to_string(i) + " outside the unit ball");
        }
        const tensor den = 1.0 - n2;
        return concat_cols({(n2 + 1.0) / den, (u * 2.0) / den});
    }
    const tensor den = n2 + 1.0;
    return concat_cols({(1.0 - n2) / den, (u * 2.0) / den});
}

tensor gyro_add(manifold_kind kind, const tensor& x, const tensor& y) {
    if (x.shape() != y.shape()) throw dimension_error("gyro_add: row shapes differ");
    if (kind == manifold_kind::euclidean) return x + y;
    require_ambient(x, "gyro_add");
    const tensor w = spatial(x), x0 = time_part(x);
    const tensor a = time_part(y), ys = spatial(y);
    const tensor p = row_dot(ys, w);
    if (kind == manifold_kind::hyperbolic) {
        return concat_cols({a * x0 + p, ys + (a + p / (x0 + 1.0)) * w});
    }
    tensor den = x0 + 1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (den(i, 0) < 1e-12) {
            den = clamp(den, 1e-12, INFINITY);
            break;
        }
    }
    return concat_cols({a * x0 - p, ys + (a - p / den) * w});
}

tensor mobius_add(const tensor& x, const tensor& y, double kappa) {
    if (x.shape() != y.shape()) throw dimension_error("mobius_add: row shapes differ");
    const tensor xy = row_dot(x, y);
    const tensor x2 = row_sq_norm(x);
    const tensor y2 = row_sq_norm(y);
    const tensor den = 1.0 + xy * (-2.0 * kappa) + x2 * y2 * (kappa * kappa);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (kappa < 0.0 && (x2(i, 0) >= 1.0 / -kappa || y2(i, 0) >= 1.0 / -kappa)) {
            throw domain_error("mobius_add: row " + std::to_string(i) + " outside the Poincare ball");
        }
        if (std::abs(den(i, 0)) < 1e-12) {
            throw numerical_error("mobius_add: vanishing denominator at row " + std::to_string(i));
        }
    }
    const tensor cx = 1.0 + xy * (-2.0 * kappa) + y2 * (-kappa);
    const tensor cy = 1.0 + x2 * kappa;
    return (cx * x + cy * y) / den;
}

namespace {

// Direct Euclidean distances; exact zero for coincident rows.
tensor euclidean_distances(const tensor& x, const tensor& c) {
    const std::size_t n = x.rows(), k = c.rows(), d = x.cols();
    std::vector<double> out(n * k);
    const auto xv = x.data();
    const auto cv = c.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = xv[i * d + t] - cv[j * d + t];
                s += diff * diff;
            }
            out[i * k + j] = std::sqrt(s);
        }
    }
    const tensor cc = c.detach();
    return make_result({n, k}, std::move(out), "euclidean_distances", {x}, [n, k, d, cc](detail::node& self) {
        const auto& xv = self.parents[0]->value;
        auto& gx = self.parents[0]->ensure_grad();
        const auto cv = cc.data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const double dist = std::max(self.value[i * k + j], distance_gradient_floor);
                const double g = self.grad[i * k + j] / dist;
                if (g == 0.0) continue;
                for (std::size_t t = 0; t < d; ++t) gx[i * d + t] += g * (xv[i * d + t] - cv[j * d + t]);
            }
        }
    });
}

} // namespace

tensor distance_matrix(manifold_kind kind, const tensor& x, const tensor& c) {
    if (x.cols() != c.cols()) {
        throw dimension_error("distance_matrix: points " + to_string(x.shape()) + " vs centroids " +
                              to_string(c.shape()));
    }
    switch (kind) {
    case manifold_kind::euclidean: return euclidean_distances(x, c);
    case manifold_kind::hyperbolic: {
        // -<x, c>_H = x0 c0 - sum x_i c_i
        tensor flipped = c.detach();
        for (std::size_t j = 0; j < flipped.rows(); ++j)
            for (std::size_t t = 1; t < flipped.cols(); ++t) flipped.at(j, t) = -flipped(j, t);
        return acosh(matmul_nt(x, flipped), distance_gradient_floor);
    }
    case manifold_kind::spherical: return acos(matmul_nt(x, c.detach()), distance_gradient_floor);
    }
    return x;
}

double max_constraint_violation(manifold_kind kind, const tensor& x) {
    if (kind == manifold_kind::euclidean) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row_span(i);
        const double q = inner(kind, row, row);
        const double target = kind == manifold_kind::hyperbolic ? -1.0 : 1.0;
        double v = std::abs(q - target);
        if (!std::isfinite(q)) v = INFINITY;
        if (kind == manifold_kind::hyperbolic && row[0] <= 0.0) v = INFINITY;
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace fmgnn

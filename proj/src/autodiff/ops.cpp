#include "fmgnn/autodiff/ops.hpp"

#include "fmgnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

namespace fmgnn::ad {

using detail::node;

namespace {

const std::vector<double>& input(const node& self, std::size_t i) { return self.parents[i]->value; }

std::vector<double>* grad_of(node& self, std::size_t i) {
    auto& p = self.parents[i];
    return p->requires_grad ? &p->grad : nullptr;
}

shape2 broadcast_shape(const shape2& a, const shape2& b, const char* op) {
    auto axis = [&](std::size_t x, std::size_t y) {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw dimension_error(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
    };
    return {axis(a.rows, b.rows), axis(a.cols, b.cols)};
}

struct broadcast_index {
    shape2 src;
    std::size_t operator()(std::size_t i, std::size_t j) const {
        return (src.rows == 1 ? 0 : i) * src.cols + (src.cols == 1 ? 0 : j);
    }
};

// f(x, y) is the value; dfdx / dfdy take (x, y, out).
template <class F, class DX, class DY>
tensor binary(const tensor& a, const tensor& b, const char* name, F f, DX dfdx, DY dfdy) {
    const shape2 out_shape = broadcast_shape(a.shape(), b.shape(), name);
    const broadcast_index ia{a.shape()};
    const broadcast_index ib{b.shape()};
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(out_shape.size());
    const bool same = a.shape() == b.shape();
    if (same) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(av[k], bv[k]);
    } else {
        for (std::size_t i = 0; i < out_shape.rows; ++i) {
            for (std::size_t j = 0; j < out_shape.cols; ++j) {
                out[i * out_shape.cols + j] = f(av[ia(i, j)], bv[ib(i, j)]);
            }
        }
    }
    return make_result(out_shape, std::move(out), name, {a, b},
                       [out_shape, ia, ib, same, dfdx, dfdy](node& self) {
                           const auto& x = input(self, 0);
                           const auto& y = input(self, 1);
                           auto* gx = grad_of(self, 0);
                           auto* gy = grad_of(self, 1);
                           const auto& g = self.grad;
                           const auto& o = self.value;
                           for (std::size_t i = 0; i < out_shape.rows; ++i) {
                               for (std::size_t j = 0; j < out_shape.cols; ++j) {
                                   const std::size_t k = i * out_shape.cols + j;
                                   const std::size_t kx = same ? k : ia(i, j);
                                   const std::size_t ky = same ? k : ib(i, j);
                                   if (gx) (*gx)[kx] += g[k] * dfdx(x[kx], y[ky], o[k]);
                                   if (gy) (*gy)[ky] += g[k] * dfdy(x[kx], y[ky], o[k]);
                               }
                           }
                       });
}

// f(x) is the value; dfdx takes (x, out).
template <class F, class D>
tensor unary(const tensor& a, const char* name, F f, D dfdx) {
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(av[k]);
    return make_result(a.shape(), std::move(out), name, {a}, [dfdx](node& self) {
        const auto& x = input(self, 0);
        auto& gx = *grad_of(self, 0);
        for (std::size_t k = 0; k < x.size(); ++k) gx[k] += self.grad[k] * dfdx(x[k], self.value[k]);
    });
}

// Radial series helpers: value and derivative with respect to s = r^2.
struct series_value {
    double f;
    double df;
};

constexpr double series_cutoff = 1e-4;

series_value sinhc(double s) {
    s = std::max(s, 0.0);
    if (s < series_cutoff) {
        return {1.0 + s / 6.0 + s * s / 120.0 + s * s * s / 5040.0, 1.0 / 6.0 + s / 60.0 + s * s / 1680.0};
    }
    const double r = std::sqrt(s);
    const double f = std::sinh(r) / r;
    return {f, (std::cosh(r) - f) / (2.0 * s)};
}

series_value sinc(double s) {
    s = std::max(s, 0.0);
    if (s < series_cutoff) {
        return {1.0 - s / 6.0 + s * s / 120.0 - s * s * s / 5040.0, -1.0 / 6.0 + s / 60.0 - s * s / 1680.0};
    }
    const double r = std::sqrt(s);
    const double f = std::sin(r) / r;
    return {f, (std::cos(r) - f) / (2.0 * s)};
}

series_value asinhc(double s) {
    s = std::max(s, 0.0);
    if (s < series_cutoff) {
        return {1.0 - s / 6.0 + 3.0 * s * s / 40.0 - 5.0 * s * s * s / 112.0,
                -1.0 / 6.0 + 3.0 * s / 20.0 - 15.0 * s * s / 112.0};
    }
    const double r = std::sqrt(s);
    const double f = std::asinh(r) / r;
    return {f, (1.0 / std::sqrt(1.0 + s) - f) / (2.0 * s)};
}

// atan2(sqrt(s), y) / sqrt(s): value, d/ds, d/dy.
struct ratio_value {
    double f;
    double ds;
    double dy;
};

ratio_value atan2_ratio_value(double s, double y) {
    s = std::max(s, 0.0);
    const double q = s + y * y;
    const double dy = q > 0.0 ? -1.0 / q : 0.0;
    if (y > 0.0 && s < series_cutoff * y * y) {
        const double y2 = y * y;
        const double t = s / y2;
        const double f = (1.0 - t / 3.0 + t * t / 5.0 - t * t * t / 7.0) / y;
        const double ds = (-1.0 / 3.0 + 2.0 * t / 5.0 - 3.0 * t * t / 7.0) / (y2 * y);
        return {f, ds, dy};
    }
    const double r = std::max(std::sqrt(s), 1e-300);
    const double f = std::atan2(r, y) / r;
    return {f, (y / q - f) / (2.0 * std::max(s, 1e-300)), dy};
}

template <class Fn>
tensor series_unary(const tensor& a, const char* name, Fn fn) {
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fn(av[k]).f;
    return make_result(a.shape(), std::move(out), name, {a}, [fn](node& self) {
        const auto& x = input(self, 0);
        auto& gx = *grad_of(self, 0);
        for (std::size_t k = 0; k < x.size(); ++k) gx[k] += self.grad[k] * fn(x[k]).df;
    });
}

void require_same_shape(const tensor& a, const tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw dimension_error(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

} // namespace

tensor add(const tensor& a, const tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}

tensor sub(const tensor& a, const tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}

tensor mul(const tensor& a, const tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}

tensor div(const tensor& a, const tensor& b) {
    return binary(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double o) { return -o / y; });
}

tensor add_scalar(const tensor& a, double c) {
    return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

tensor mul_scalar(const tensor& a, double c) {
    return unary(a, "mul_scalar", [c](double x) { return x * c; }, [c](double, double) { return c; });
}

tensor neg(const tensor& a) {
    return unary(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

tensor exp(const tensor& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

tensor log(const tensor& a) {
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

tensor sqrt(const tensor& a, double floor) {
    return unary(
        a, "sqrt", [](double x) { return std::sqrt(std::max(x, 0.0)); },
        [floor](double x, double) { return 0.5 / std::sqrt(std::max(x, floor)); });
}

tensor square(const tensor& a) {
    return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

tensor cosh(const tensor& a) {
    return unary(a, "cosh", [](double x) { return std::cosh(x); }, [](double x, double) { return std::sinh(x); });
}

tensor sinh(const tensor& a) {
    return unary(a, "sinh", [](double x) { return std::sinh(x); }, [](double x, double) { return std::cosh(x); });
}

tensor cos(const tensor& a) {
    return unary(a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

tensor sin(const tensor& a) {
    return unary(a, "sin", [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

tensor tanh(const tensor& a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

tensor sigmoid(const tensor& a) {
    return unary(
        a, "sigmoid",
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

tensor softplus(const tensor& a) {
    return unary(
        a, "softplus", [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

tensor relu(const tensor& a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

tensor acosh(const tensor& a, double floor) {
    return unary(
        a, "acosh", [](double x) { return std::acosh(std::max(x, 1.0)); },
        [floor](double x, double) {
            const double xf = std::max(x, 1.0 + floor);
            return 1.0 / std::sqrt(xf * xf - 1.0);
        });
}

tensor acos(const tensor& a, double floor) {
    return unary(
        a, "acos", [](double x) { return std::acos(std::clamp(x, -1.0, 1.0)); },
        [floor](double x, double) { return -1.0 / std::sqrt(std::max(1.0 - x * x, 2.0 * floor)); });
}

tensor clamp(const tensor& a, double lo, double hi) {
    return unary(
        a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

tensor cosh_sqrt(const tensor& s) {
    return series_unary(s, "cosh_sqrt", [](double v) {
        const double c = std::cosh(std::sqrt(std::max(v, 0.0)));
        return series_value{c, sinhc(v).f / 2.0};
    });
}

tensor sinhc_sqrt(const tensor& s) { return series_unary(s, "sinhc_sqrt", sinhc); }

tensor cos_sqrt(const tensor& s) {
    return series_unary(s, "cos_sqrt", [](double v) {
        const double c = std::cos(std::sqrt(std::max(v, 0.0)));
        return series_value{c, -sinc(v).f / 2.0};
    });
}

tensor sinc_sqrt(const tensor& s) { return series_unary(s, "sinc_sqrt", sinc); }

tensor asinhc_sqrt(const tensor& s) { return series_unary(s, "asinhc_sqrt", asinhc); }

tensor atan2_ratio(const tensor& s, const tensor& y) {
    require_same_shape(s, y, "atan2_ratio");
    std::vector<double> out(s.numel());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = atan2_ratio_value(s.data()[k], y.data()[k]).f;
    return make_result(s.shape(), std::move(out), "atan2_ratio", {s, y}, [](node& self) {
        const auto& sv = input(self, 0);
        const auto& yv = input(self, 1);
        auto* gs = grad_of(self, 0);
        auto* gy = grad_of(self, 1);
        for (std::size_t k = 0; k < sv.size(); ++k) {
            const auto r = atan2_ratio_value(sv[k], yv[k]);
            if (gs) (*gs)[k] += self.grad[k] * r.ds;
            if (gy) (*gy)[k] += self.grad[k] * r.dy;
        }
    });
}

tensor matmul(const tensor& a, const tensor& b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    std::vector<double> out(n * p, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out.data() + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = av[i * m + k];
            if (aik == 0.0) continue;
            const double* brow = bv.data() + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    return make_result({n, p}, std::move(out), "matmul", {a, b}, [n, m, p](node& self) {
        const auto& av = input(self, 0);
        const auto& bv = input(self, 1);
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < m; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < p; ++j) s += g[i * p + j] * bv[k * p + j];
                    (*ga)[i * m + k] += s;
                }
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < m; ++k) {
                    const double aik = av[i * m + k];
                    if (aik == 0.0) continue;
                    for (std::size_t j = 0; j < p; ++j) (*gb)[k * p + j] += aik * g[i * p + j];
                }
            }
        }
    });
}

tensor matmul_nt(const tensor& a, const tensor& b) {
    if (a.cols() != b.cols()) {
        throw dimension_error("matmul_nt: " + to_string(a.shape()) + " x " + to_string(b.shape()) + "^T");
    }
    const std::size_t n = a.rows(), m = a.cols(), p = b.rows();
    std::vector<double> out(n * p, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    // Through b^T so the inner loop runs over contiguous outputs; every entry
    // still sums its products in order k = 0, 1, ...
    std::vector<double> bt(m * p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < m; ++k) bt[k * p + j] = bv[j * m + k];
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out.data() + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = av[i * m + k];
            const double* brow = bt.data() + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    return make_result({n, p}, std::move(out), "matmul_nt", {a, b}, [n, m, p](node& self) {
        const auto& av = input(self, 0);
        const auto& bv = input(self, 1);
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    const double gij = g[i * p + j];
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < m; ++k) (*ga)[i * m + k] += gij * bv[j * m + k];
                }
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    const double gij = g[i * p + j];
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < m; ++k) (*gb)[j * m + k] += gij * av[i * m + k];
                }
            }
        }
    });
}

tensor transpose(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
    return make_result({c, r}, std::move(out), "transpose", {a}, [r, c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    });
}

tensor sum(const tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result({1, 1}, {s}, "sum", {a}, [](node& self) {
        auto& ga = *grad_of(self, 0);
        for (double& g : ga) g += self.grad[0];
    });
}

tensor mean(const tensor& a) {
    if (a.numel() == 0) throw contract_error("mean of an empty tensor");
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

tensor row_sum(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += a.data()[i * c + j];
    return make_result({r, 1}, std::move(out), "row_sum", {a}, [r, c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[i];
    });
}

tensor col_sum(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += a.data()[i * c + j];
    return make_result({1, c}, std::move(out), "col_sum", {a}, [r, c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j];
    });
}

tensor row_dot(const tensor& a, const tensor& b) {
    require_same_shape(a, b, "row_dot");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += a.data()[i * c + j] * b.data()[i * c + j];
    return make_result({r, 1}, std::move(out), "row_dot", {a, b}, [r, c](node& self) {
        const auto& av = input(self, 0);
        const auto& bv = input(self, 1);
        auto* ga = grad_of(self, 0);
        auto* gb = grad_of(self, 1);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                if (ga) (*ga)[i * c + j] += self.grad[i] * bv[i * c + j];
                if (gb) (*gb)[i * c + j] += self.grad[i] * av[i * c + j];
            }
        }
    });
}

tensor row_sq_norm(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += a.data()[i * c + j] * a.data()[i * c + j];
    return make_result({r, 1}, std::move(out), "row_sq_norm", {a}, [r, c](node& self) {
        const auto& av = input(self, 0);
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += 2.0 * self.grad[i] * av[i * c + j];
    });
}

tensor softmax_rows(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        double* y = out.data() + i * c;
        const double mx = *std::max_element(x, x + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < c; ++j) y[j] /= z;
    }
    return make_result({r, c}, std::move(out), "softmax_rows", {a}, [r, c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.value.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double dotgy = 0.0;
            for (std::size_t j = 0; j < c; ++j) dotgy += g[j] * y[j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[j] * (g[j] - dotgy);
        }
    });
}

tensor log_softmax_rows(const tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        const double mx = *std::max_element(x, x + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[j] - lz;
    }
    return make_result({r, c}, std::move(out), "log_softmax_rows", {a}, [r, c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.value.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double gs = 0.0;
            for (std::size_t j = 0; j < c; ++j) gs += g[j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j] - std::exp(y[j]) * gs;
        }
    });
}

tensor concat_cols(const std::vector<tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::vector<std::size_t> offsets;
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw dimension_error("concat_cols: row counts differ");
        offsets.push_back(c);
        c += p.cols();
    }
    std::vector<double> out(r * c);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t pc = parts[k].cols();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(parts[k].data().data() + i * pc, pc, out.data() + i * c + offsets[k]);
    }
    return make_result({r, c}, std::move(out), "concat_cols", parts, [r, c, offsets](node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto* gp = grad_of(self, k);
            if (!gp) continue;
            const std::size_t pc = self.parents[k]->shape.cols;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < pc; ++j) (*gp)[i * pc + j] += self.grad[i * c + offsets[k] + j];
        }
    });
}

tensor concat_rows(const std::vector<tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::vector<double> out;
    std::size_t r = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw dimension_error("concat_rows: column counts differ");
        out.insert(out.end(), p.data().begin(), p.data().end());
        r += p.rows();
    }
    return make_result({r, c}, std::move(out), "concat_rows", parts, [](node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t n = self.parents[k]->value.size();
            if (auto* gp = grad_of(self, k)) {
                for (std::size_t i = 0; i < n; ++i) (*gp)[i] += self.grad[offset + i];
            }
            offset += n;
        }
    });
}

tensor slice_cols(const tensor& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols()) {
        throw dimension_error("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                              to_string(a.shape()));
    }
    const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
    std::vector<double> out(r * w);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(a.data().data() + i * c + begin, w, out.data() + i * w);
    return make_result({r, w}, std::move(out), "slice_cols", {a}, [r, c, w, begin](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += self.grad[i * w + j];
    });
}

tensor gather_rows(const tensor& a, std::span<const std::size_t> index) {
    const std::size_t c = a.cols();
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(idx.size() * c);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw dimension_error("gather_rows: index " + std::to_string(idx[i]) + " out of range");
        std::copy_n(a.data().data() + idx[i] * c, c, out.data() + i * c);
    }
    const shape2 out_shape{idx.size(), c};
    return make_result(out_shape, std::move(out), "gather_rows", {a}, [idx = std::move(idx), c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += self.grad[i * c + j];
    });
}

tensor pick(const tensor& a, std::span<const std::size_t> col) {
    if (col.size() != a.rows()) throw dimension_error("pick: need one column index per row");
    const std::size_t c = a.cols();
    std::vector<std::size_t> cols(col.begin(), col.end());
    std::vector<double> out(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] >= c) throw dimension_error("pick: column " + std::to_string(cols[i]) + " out of range");
        out[i] = a.data()[i * c + cols[i]];
    }
    const shape2 out_shape{cols.size(), 1};
    return make_result(out_shape, std::move(out), "pick", {a}, [cols = std::move(cols), c](node& self) {
        auto& ga = *grad_of(self, 0);
        for (std::size_t i = 0; i < cols.size(); ++i) ga[i * c + cols[i]] += self.grad[i];
    });
}

tensor spmm(const csr_matrix& a, const tensor& b) { return spmm(std::make_shared<const csr_matrix>(a), b); }

tensor spmm(std::shared_ptr<const csr_matrix> shared, const tensor& b) {
    const csr_matrix& a = *shared;
    if (a.cols != b.rows()) {
        throw dimension_error("spmm: sparse " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " times " +
                              to_string(b.shape()));
    }
    const std::size_t p = b.cols();
    std::vector<double> out(a.rows * p, 0.0);
    const auto& bv = b.data();
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* orow = out.data() + i * p;
        for (std::size_t e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) {
            const double w = a.values[e];
            const double* brow = bv.data() + a.col_idx[e] * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += w * brow[j];
        }
    }
    return make_result({a.rows, p}, std::move(out), "spmm", {b}, [shared, p](node& self) {
        const csr_matrix& m = *shared;
        auto& gb = *grad_of(self, 0);
        for (std::size_t i = 0; i < m.rows; ++i) {
            const double* grow = self.grad.data() + i * p;
            for (std::size_t e = m.row_ptr[i]; e < m.row_ptr[i + 1]; ++e) {
                const double w = m.values[e];
                double* brow = gb.data() + m.col_idx[e] * p;
                for (std::size_t j = 0; j < p; ++j) brow[j] += w * grow[j];
            }
        }
    });
}

tensor dropout(const tensor& a, double p, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw contract_error("dropout: probability must be in [0, 1)");
    if (p == 0.0) return a;
    std::bernoulli_distribution keep(1.0 - p);
    std::vector<double> mask(a.numel());
    const double scale = 1.0 / (1.0 - p);
    for (double& m : mask) m = keep(rng) ? scale : 0.0;
    return mul(a, tensor(a.shape(), std::move(mask)));
}

namespace {

using unary_fn = std::function<tensor(const tensor&)>;
using binary_fn = std::function<tensor(const tensor&, const tensor&)>;

const std::map<std::string_view, unary_fn>& unary_table() {
    static const std::map<std::string_view, unary_fn> table{
        {"neg", [](const tensor& a) { return neg(a); }},
        {"exp", [](const tensor& a) { return exp(a); }},
        {"log", [](const tensor& a) { return log(a); }},
        {"sqrt", [](const tensor& a) { return sqrt(a); }},
        {"square", [](const tensor& a) { return square(a); }},
        {"cosh", [](const tensor& a) { return cosh(a); }},
        {"sinh", [](const tensor& a) { return sinh(a); }},
        {"cos", [](const tensor& a) { return cos(a); }},
        {"sin", [](const tensor& a) { return sin(a); }},
        {"tanh", [](const tensor& a) { return tanh(a); }},
        {"sigmoid", [](const tensor& a) { return sigmoid(a); }},
        {"softplus", [](const tensor& a) { return softplus(a); }},
        {"relu", [](const tensor& a) { return relu(a); }},
        {"acosh", [](const tensor& a) { return acosh(a); }},
        {"acos", [](const tensor& a) { return acos(a); }},
        {"cosh_sqrt", [](const tensor& a) { return cosh_sqrt(a); }},
        {"sinhc_sqrt", [](const tensor& a) { return sinhc_sqrt(a); }},
        {"cos_sqrt", [](const tensor& a) { return cos_sqrt(a); }},
        {"sinc_sqrt", [](const tensor& a) { return sinc_sqrt(a); }},
        {"asinhc_sqrt", [](const tensor& a) { return asinhc_sqrt(a); }},
        {"transpose", [](const tensor& a) { return transpose(a); }},
        {"sum", [](const tensor& a) { return sum(a); }},
        {"mean", [](const tensor& a) { return mean(a); }},
        {"row_sum", [](const tensor& a) { return row_sum(a); }},
        {"col_sum", [](const tensor& a) { return col_sum(a); }},
        {"row_sq_norm", [](const tensor& a) { return row_sq_norm(a); }},
        {"softmax_rows", [](const tensor& a) { return softmax_rows(a); }},
        {"log_softmax_rows", [](const tensor& a) { return log_softmax_rows(a); }},
    };
    return table;
}

const std::map<std::string_view, binary_fn>& binary_table() {
    static const std::map<std::string_view, binary_fn> table{
        {"add", [](const tensor& a, const tensor& b) { return add(a, b); }},
        {"sub", [](const tensor& a, const tensor& b) { return sub(a, b); }},
        {"mul", [](const tensor& a, const tensor& b) { return mul(a, b); }},
        {"div", [](const tensor& a, const tensor& b) { return div(a, b); }},
        {"matmul", [](const tensor& a, const tensor& b) { return matmul(a, b); }},
        {"matmul_nt", [](const tensor& a, const tensor& b) { return matmul_nt(a, b); }},
        {"row_dot", [](const tensor& a, const tensor& b) { return row_dot(a, b); }},
        {"atan2_ratio", [](const tensor& a, const tensor& b) { return atan2_ratio(a, b); }},
        {"concat_cols", [](const tensor& a, const tensor& b) { return concat_cols({a, b}); }},
        {"concat_rows", [](const tensor& a, const tensor& b) { return concat_rows({a, b}); }},
    };
    return table;
}

} // namespace

tensor forward_op(std::string_view name, const std::vector<tensor>& inputs) {
    if (auto it = unary_table().find(name); it != unary_table().end()) {
        if (inputs.size() != 1) throw contract_error(std::string(name) + " takes one input");
        return it->second(inputs[0]);
    }
    if (auto it = binary_table().find(name); it != binary_table().end()) {
        if (inputs.size() != 2) throw contract_error(std::string(name) + " takes two inputs");
        return it->second(inputs[0], inputs[1]);
    }
    throw contract_error("unknown operation '" + std::string(name) + "'");
}

std::vector<std::string_view> unary_op_names() {
    std::vector<std::string_view> names;
    for (const auto& [k, v] : unary_table()) names.push_back(k);
    return names;
}

std::vector<std::string_view> binary_op_names() {
    std::vector<std::string_view> names;
    for (const auto& [k, v] : binary_table()) names.push_back(k);
    return names;
}

} // namespace fmgnn::ad

#pragma once

#include "fmgnn/autodiff/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace fmgnn::ad {

// Elementwise binary ops broadcast NumPy-style over the two axes: each axis
// must match or be 1 on one side.
tensor add(const tensor& a, const tensor& b);
tensor sub(const tensor& a, const tensor& b);
tensor mul(const tensor& a, const tensor& b);
tensor div(const tensor& a, const tensor& b);

tensor add_scalar(const tensor& a, double c);
tensor mul_scalar(const tensor& a, double c);
tensor neg(const tensor& a);

inline tensor operator+(const tensor& a, const tensor& b) { return add(a, b); }
inline tensor operator-(const tensor& a, const tensor& b) { return sub(a, b); }
inline tensor operator*(const tensor& a, const tensor& b) { return mul(a, b); }
inline tensor operator/(const tensor& a, const tensor& b) { return div(a, b); }
inline tensor operator-(const tensor& a) { return neg(a); }
inline tensor operator+(const tensor& a, double c) { return add_scalar(a, c); }
inline tensor operator+(double c, const tensor& a) { return add_scalar(a, c); }
inline tensor operator-(const tensor& a, double c) { return add_scalar(a, -c); }
inline tensor operator-(double c, const tensor& a) { return add_scalar(neg(a), c); }
inline tensor operator*(const tensor& a, double c) { return mul_scalar(a, c); }
inline tensor operator*(double c, const tensor& a) { return mul_scalar(a, c); }

tensor exp(const tensor& a);
tensor log(const tensor& a);
/// sqrt(max(x, 0)); the derivative uses max(x, floor) in the denominator.
tensor sqrt(const tensor& a, double floor = 1e-24);
tensor square(const tensor& a);
tensor cosh(const tensor& a);
tensor sinh(const tensor& a);
tensor cos(const tensor& a);
tensor sin(const tensor& a);
tensor tanh(const tensor& a);
tensor sigmoid(const tensor& a);
tensor softplus(const tensor& a);
tensor relu(const tensor& a);
/// acosh(max(x, 1)); the derivative is 1/sqrt(x^2 - 1) with x floored at 1 + floor.
tensor acosh(const tensor& a, double floor = 1e-12);
/// acos(clamp(x, -1, 1)); the derivative floors 1 - x^2 at 2 * floor.
tensor acos(const tensor& a, double floor = 1e-12);
/// Clamp with zero gradient outside [lo, hi].
tensor clamp(const tensor& a, double lo, double hi);

// Smooth radial factors of a squared norm s = r^2 >= 0, evaluated by series
// near s = 0 so the origin exp/log maps stay differentiable at zero.
tensor cosh_sqrt(const tensor& s);  // cosh(r)
tensor sinhc_sqrt(const tensor& s); // sinh(r) / r
tensor cos_sqrt(const tensor& s);   // cos(r)
tensor sinc_sqrt(const tensor& s);  // sin(r) / r
tensor asinhc_sqrt(const tensor& s); // asinh(r) / r
/// atan2(r, y) / r with r = sqrt(s); the angle-per-radius of a sphere point
/// with spatial norm r and first coordinate y.
tensor atan2_ratio(const tensor& s, const tensor& y);

tensor matmul(const tensor& a, const tensor& b);
/// a * b^T without materialising the transpose.
tensor matmul_nt(const tensor& a, const tensor& b);
tensor transpose(const tensor& a);

tensor sum(const tensor& a);
tensor mean(const tensor& a);
/// Per-row sum, rows x 1.
tensor row_sum(const tensor& a);
/// Per-column sum, 1 x cols.
tensor col_sum(const tensor& a);
/// Per-row dot product of equally shaped matrices, rows x 1.
tensor row_dot(const tensor& a, const tensor& b);
/// Per-row squared Euclidean norm, rows x 1.
tensor row_sq_norm(const tensor& a);

tensor softmax_rows(const tensor& a);
tensor log_softmax_rows(const tensor& a);

tensor concat_cols(const std::vector<tensor>& parts);
tensor concat_rows(const std::vector<tensor>& parts);
tensor slice_cols(const tensor& a, std::size_t begin, std::size_t end);
tensor gather_rows(const tensor& a, std::span<const std::size_t> index);
/// out[i] = a(i, col[i]); rows x 1.
tensor pick(const tensor& a, std::span<const std::size_t> col);

/// Compressed sparse rows with constant values.
struct csr_matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const noexcept { return values.size(); }
};

/// Constant sparse matrix times dense tensor. Gradients flow to `b` only.
tensor spmm(const csr_matrix& a, const tensor& b);
/// Same, sharing the structure with the recorded graph instead of copying it.
tensor spmm(std::shared_ptr<const csr_matrix> a, const tensor& b);

/// Inverted dropout: zero each entry with probability p, scale survivors by
/// 1/(1-p). Identity when p == 0.
tensor dropout(const tensor& a, double p, std::mt19937_64& rng);

/// Name-dispatched forward for the primitives above that take tensors only
/// ("add", "matmul", "softmax_rows", ...). Throws contract_error on unknown
/// names or wrong arity.
tensor forward_op(std::string_view name, const std::vector<tensor>& inputs);

/// Names accepted by forward_op, grouped by arity.
std::vector<std::string_view> unary_op_names();
std::vector<std::string_view> binary_op_names();

} // namespace fmgnn::ad

#pragma once

#include "fmgnn/autodiff/tensor.hpp"

#include <functional>
#include <vector>

namespace fmgnn::ad {

struct grad_check_report {
    double max_relative_error = 0.0;
    bool pass = false;
    std::size_t worst_param = 0; // index into params
    std::size_t worst_index = 0; // flat coordinate within that param
    std::size_t coordinates = 0; // number of coordinates compared
};

/// Scalar function rebuilt from scratch on every call.
using scalar_fn = std::function<tensor()>;

/// Central-difference check of the reverse-mode gradient of f with respect
/// to params. Relative error is |a - n| / max(1, |a|, |n|). Leaf gradients of
/// params are overwritten.
grad_check_report grad_check(const scalar_fn& f, std::vector<tensor> params, double step = 1e-6,
                             double tol = 1e-6);

/// Same comparison against caller-supplied analytic gradients (one flat
/// vector per param).
grad_check_report compare_gradients(const scalar_fn& f, std::vector<tensor> params,
                                    const std::vector<std::vector<double>>& analytic, double step,
                                    double tol);

} // namespace fmgnn::ad

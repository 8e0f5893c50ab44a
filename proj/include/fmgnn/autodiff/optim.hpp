#pragma once

#include "fmgnn/autodiff/tensor.hpp"

#include <span>
#include <vector>

namespace fmgnn::ad {

/// Adaptive-moment state. Moments are created lazily on the first step and
/// keep the shape of their parameter.
struct optimizer_state {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 5e-4;
    long step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    /// Per-parameter switch for weight decay; empty means "decay everything".
    std::vector<bool> decay;
};

/// One bias-corrected adaptive-moment update with decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// Throws contract_error when a parameter has no gradient.
void adam_step(std::span<tensor> params, optimizer_state& state);

void zero_grads(std::span<tensor> params);

} // namespace fmgnn::ad

#include "fmgnn/autodiff/optim.hpp"

#include "fmgnn/errors.hpp"

#include <cmath>
#include <string>

namespace fmgnn::ad {

void adam_step(std::span<tensor> params, optimizer_state& state) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw contract_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
        }
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), 0.0);
            state.second_moment.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw contract_error("adam_step: optimizer state tracks a different parameter list");
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].data();
        auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != values.size()) throw contract_error("adam_step: moment shape mismatch");
        const double wd = (state.decay.empty() || state.decay[i]) ? state.weight_decay : 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = grad[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            values[k] -= state.learning_rate * (m_hat / (std::sqrt(v_hat) + state.epsilon) + wd * values[k]);
        }
    }
}

void zero_grads(std::span<tensor> params) {
    for (auto& p : params) p.zero_grad();
}

} // namespace fmgnn::ad

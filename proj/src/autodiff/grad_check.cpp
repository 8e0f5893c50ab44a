#include "fmgnn/autodiff/grad_check.hpp"

#include "fmgnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fmgnn::ad {

grad_check_report compare_gradients(const scalar_fn& f, std::vector<tensor> params,
                                    const std::vector<std::vector<double>>& analytic, double step,
                                    double tol) {
    if (step < 1e-7 || step > 1e-3) throw contract_error("grad_check: step must lie in [1e-7, 1e-3]");
    if (analytic.size() != params.size()) throw contract_error("grad_check: one gradient per parameter");

    grad_check_report report;
    no_grad_guard guard;
    auto evaluate = [&](std::size_t p, std::size_t k) {
        const double v = f().item();
        if (!std::isfinite(v)) {
            throw numerical_error("grad_check: non-finite value perturbing parameter " + std::to_string(p) +
                                  " coordinate " + std::to_string(k));
        }
        return v;
    };
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].data();
        if (analytic[p].size() != values.size()) throw contract_error("grad_check: gradient length mismatch");
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + step;
            const double up = evaluate(p, k);
            values[k] = saved - step;
            const double down = evaluate(p, k);
            values[k] = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[p][k];
            if (!std::isfinite(a)) {
                throw numerical_error("grad_check: non-finite analytic gradient at parameter " + std::to_string(p) +
                                      " coordinate " + std::to_string(k));
            }
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_param = p;
                report.worst_index = k;
            }
            ++report.coordinates;
        }
    }
    report.pass = report.max_relative_error <= tol;
    return report;
}

grad_check_report grad_check(const scalar_fn& f, std::vector<tensor> params, double step, double tol) {
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    tensor out = f();
    backward(out);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
    }
    return compare_gradients(f, std::move(params), analytic, step, tol);
}

} // namespace fmgnn::ad

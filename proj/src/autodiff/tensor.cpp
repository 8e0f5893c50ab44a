#include "fmgnn/autodiff/tensor.hpp"

#include "fmgnn/errors.hpp"

#include <algorithm>
#include <unordered_set>

namespace fmgnn::ad {

std::string to_string(const shape2& s) {
    return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

} // namespace

tensor::tensor(shape2 shape, double fill, bool requires_grad) : node_(std::make_shared<detail::node>()) {
    node_->shape = shape;
    node_->value.assign(shape.size(), fill);
    node_->requires_grad = requires_grad;
}

tensor::tensor(shape2 shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::node>()) {
    if (values.size() != shape.size()) {
        throw dimension_error("tensor: " + std::to_string(values.size()) + " values for shape " +
                              to_string(shape));
    }
    node_->shape = shape;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

tensor tensor::scalar(double v, bool requires_grad) { return tensor({1, 1}, v, requires_grad); }

tensor tensor::row(std::span<const double> values, bool requires_grad) {
    return tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()), requires_grad);
}

tensor tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
    std::vector<std::vector<double>> copy;
    for (const auto& r : rows) copy.emplace_back(r);
    return from_rows(copy, requires_grad);
}

tensor tensor::from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw dimension_error("tensor::from_rows: ragged rows");
        values.insert(values.end(), row.begin(), row.end());
    }
    return tensor({r, c}, std::move(values), requires_grad);
}

double tensor::item() const {
    if (numel() != 1) throw contract_error("tensor::item on non-scalar " + to_string(shape()));
    return node_->value[0];
}

tensor& tensor::set_requires_grad(bool on) {
    if (!node_->is_leaf()) throw contract_error("set_requires_grad on a non-leaf tensor");
    node_->requires_grad = on;
    return *this;
}

void tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

tensor tensor::detach() const { return tensor(shape(), node_->value, false); }

std::vector<std::vector<double>> tensor::to_rows() const {
    std::vector<std::vector<double>> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) {
        auto s = row_span(r);
        out[r].assign(s.begin(), s.end());
    }
    return out;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

no_grad_guard::no_grad_guard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
no_grad_guard::~no_grad_guard() { g_grad_enabled = previous_; }

tensor make_result(shape2 shape, std::vector<double> value, const char* op,
                   const std::vector<tensor>& inputs, detail::backward_fn backward) {
    auto n = std::make_shared<detail::node>();
    n->shape = shape;
    n->value = std::move(value);
    n->op = op;
    if (g_grad_enabled) {
        const bool any = std::any_of(inputs.begin(), inputs.end(), [](const tensor& t) { return t.requires_grad(); });
        if (any) {
            n->requires_grad = true;
            n->parents.reserve(inputs.size());
            for (const auto& t : inputs) n->parents.push_back(t.impl());
            n->backward = std::move(backward);
        }
    }
    return tensor(std::move(n));
}

tensor make_result(shape2 shape, std::vector<double> value, const char* op,
                   std::initializer_list<tensor> inputs, detail::backward_fn backward) {
    return make_result(shape, std::move(value), op, std::vector<tensor>(inputs), std::move(backward));
}

computation_tape computation_tape::record(const tensor& output) {
    computation_tape tape;
    if (!output.requires_grad()) return tape;

    // Iterative post-order DFS so deep graphs cannot overflow the stack.
    std::unordered_set<const detail::node*> visited{output.impl().get()};
    std::vector<std::pair<std::shared_ptr<detail::node>, std::size_t>> stack;
    stack.emplace_back(output.impl(), 0);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            auto p = n->parents[next++];
            if (p->requires_grad && visited.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
            continue;
        }
        tape.nodes_.push_back(std::move(n));
        stack.pop_back();
    }
    return tape;
}

void computation_tape::run_backward() {
    if (nodes_.empty()) return;
    auto& out = *nodes_.back();
    out.ensure_grad();
    std::fill(out.grad.begin(), out.grad.end(), 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::node& n = **it;
        if (n.is_leaf()) continue;
        for (auto& p : n.parents) {
            if (p->requires_grad) p->ensure_grad();
        }
        n.backward(n);
    }
}

void computation_tape::release() {
    for (auto& n : nodes_) {
        if (n->is_leaf()) continue;
        n->backward = nullptr;
        n->parents.clear();
        n->grad.clear();
        n->grad.shrink_to_fit();
        n->requires_grad = false;
    }
    nodes_.clear();
}

void backward(const tensor& output) {
    if (!output.defined() || output.numel() != 1) {
        throw contract_error("backward: output must be a scalar");
    }
    if (!output.requires_grad() || output.impl()->is_leaf()) {
        throw contract_error("backward: nothing recorded for this output");
    }
    auto tape = computation_tape::record(output);
    tape.run_backward();
    tape.release();
}

} // namespace fmgnn::ad

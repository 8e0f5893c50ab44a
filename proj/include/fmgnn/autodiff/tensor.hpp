#pragma once

// Dense double-precision matrices with reverse-mode differentiation.
//
// Every tensor is two-dimensional (rows x cols, row-major); scalars are 1x1
// and vectors are single rows. An operation whose inputs require gradients
// records a node holding its parents and a backward closure. backward()
// linearises the recorded graph into a computation_tape (topological order),
// runs the closures in reverse, and then releases the interior nodes.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fmgnn::ad {

struct shape2 {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    friend bool operator==(const shape2&, const shape2&) = default;
};

std::string to_string(const shape2& s);

namespace detail {

struct node;
using backward_fn = std::function<void(node&)>;

struct node {
    shape2 shape;
    std::vector<double> value;
    std::vector<double> grad; // empty until first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<node>> parents;
    backward_fn backward;

    bool is_leaf() const noexcept { return !backward; }

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

} // namespace detail

class tensor {
public:
    tensor() = default;
    explicit tensor(shape2 shape, double fill = 0.0, bool requires_grad = false);
    tensor(shape2 shape, std::vector<double> values, bool requires_grad = false);

    static tensor scalar(double v, bool requires_grad = false);
    static tensor row(std::span<const double> values, bool requires_grad = false);
    static tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                            bool requires_grad = false);
    static tensor from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const shape2& shape() const { return node_->shape; }
    std::size_t rows() const { return node_->shape.rows; }
    std::size_t cols() const { return node_->shape.cols; }
    std::size_t numel() const { return node_->value.size(); }

    std::span<double> data() { return node_->value; }
    std::span<const double> data() const { return node_->value; }
    double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
    std::span<const double> row_span(std::size_t r) const {
        return std::span<const double>(node_->value).subspan(r * cols(), cols());
    }
    double item() const;

    bool requires_grad() const { return node_ && node_->requires_grad; }
    tensor& set_requires_grad(bool on);
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Gradient buffer; allocated (zero) on first access.
    std::span<double> grad() { return node_->ensure_grad(); }
    std::span<const double> grad() const { return node_->ensure_grad(); }
    void zero_grad();

    /// Same values, no history, not requiring gradients.
    tensor detach() const;
    std::vector<std::vector<double>> to_rows() const;

    const char* op_name() const { return node_->op; }
    const std::shared_ptr<detail::node>& impl() const { return node_; }
    explicit tensor(std::shared_ptr<detail::node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::node> node_;
};

/// Whether new operations record history on this thread.
bool grad_enabled() noexcept;

/// Disables recording for its lifetime (evaluation, finite differences).
class no_grad_guard {
public:
    no_grad_guard();
    ~no_grad_guard();
    no_grad_guard(const no_grad_guard&) = delete;
    no_grad_guard& operator=(const no_grad_guard&) = delete;

private:
    bool previous_;
};

/// Builds an op result. Records parents and the backward closure only when
/// recording is enabled and some input requires gradients.
tensor make_result(shape2 shape, std::vector<double> value, const char* op,
                   std::initializer_list<tensor> inputs, detail::backward_fn backward);
tensor make_result(shape2 shape, std::vector<double> value, const char* op,
                   const std::vector<tensor>& inputs, detail::backward_fn backward);

/// Recorded history of one scalar output in topological order (inputs
/// before the nodes that consume them).
class computation_tape {
public:
    static computation_tape record(const tensor& output);

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<std::shared_ptr<detail::node>>& nodes() const noexcept { return nodes_; }

    /// Seeds d(output)/d(output) = 1 and runs every closure once, in reverse.
    void run_backward();

    /// Drops closures, parent links and interior gradients. Leaf gradients stay.
    void release();

private:
    std::vector<std::shared_ptr<detail::node>> nodes_;
};

/// Accumulates d(output)/d(leaf) into every leaf requiring gradients, then
/// clears the recorded history.
void backward(const tensor& output);

} // namespace fmgnn::ad

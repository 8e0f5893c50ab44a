#include "fmgnn/model.hpp"

#include "fmgnn/errors.hpp"
#include "fmgnn/manifold_ops.hpp"

#include <cmath>

namespace fmgnn {

using namespace ad;

std::string manifold_set::name() const {
    std::string s;
    if (euclidean) s += 'E';
    if (hyperbolic) s += 'H';
    if (spherical) s += 'S';
    return s;
}

manifold_set manifold_set::parse(std::string_view s) {
    manifold_set m{false, false, false};
    for (char c : s) {
        bool* flag = c == 'E' || c == 'e' ? &m.euclidean
                     : c == 'H' || c == 'h' ? &m.hyperbolic
                     : c == 'S' || c == 's' ? &m.spherical
                                            : nullptr;
        if (!flag || *flag) throw contract_error("manifolds: expected a subset of E, H, S, got '" + std::string(s) + "'");
        *flag = true;
    }
    if (m.count() == 0) throw contract_error("manifolds: at least one of E, H, S is required");
    return m;
}

std::array<manifold_set, 7> manifold_set::all_subsets() {
    return {parse("E"), parse("H"), parse("S"), parse("EH"), parse("ES"), parse("HS"), parse("EHS")};
}

std::vector<tensor> model_params::tensors() const {
    std::vector<tensor> out{lift};
    for (const auto& l : layers) {
        out.push_back(l.weight);
        for (const auto& b : l.bias) out.push_back(b);
        out.push_back(l.cross);
    }
    return out;
}

model_params model_params::clone() const {
    auto copy = [](const tensor& t) {
        tensor c = t.detach();
        c.set_requires_grad(t.requires_grad());
        return c;
    };
    model_params p;
    p.lift = copy(lift);
    for (const auto& l : layers) {
        layer_params q;
        q.weight = copy(l.weight);
        for (std::size_t i = 0; i < 3; ++i) q.bias[i] = copy(l.bias[i]);
        q.cross = copy(l.cross);
        p.layers.push_back(std::move(q));
    }
    return p;
}

namespace {

tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = u(rng);
    return tensor({rows, cols}, std::move(v), true);
}

} // namespace

model_params init_params(const model_config& cfg, std::mt19937_64& rng) {
    if (cfg.input_dim == 0 || cfg.hidden_dim == 0) throw contract_error("model: input and hidden dims must be positive");
    model_params p;
    p.lift = glorot(cfg.input_dim, cfg.hidden_dim, rng);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        layer_params q;
        q.weight = glorot(cfg.hidden_dim, cfg.hidden_dim, rng);
        for (auto& b : q.bias) b = tensor({1, cfg.hidden_dim}, 0.0, true);
        q.cross = tensor({1, 6}, 0.0, true);
        p.layers.push_back(std::move(q));
    }
    return p;
}

manifold_state lift_features(std::shared_ptr<const csr_matrix> features, const tensor& lift,
                             const manifold_set& active) {
    const tensor base = spmm(std::move(features), lift);
    manifold_state s;
    for (auto k : all_manifolds) {
        if (active.has(k)) s[k] = exp0(k, base);
    }
    return s;
}

manifold_state fuse_manifolds(const manifold_state& in, const layer_params& p, const manifold_set& active) {
    using enum manifold_kind;
    auto lambda = [&](cross_slot c) { return slice_cols(p.cross, c, c + 1); };
    const bool e = active.has(euclidean), h = active.has(hyperbolic), s = active.has(spherical);

    tensor log_h, log_s;
    if (h) log_h = log0(hyperbolic, in[hyperbolic]);
    if (s) log_s = log0(spherical, in[spherical]);

    manifold_state out;
    if (e) {
        tensor x = in[euclidean];
        if (h) x = x + lambda(h_to_e) * log_h;
        if (s) x = x + lambda(s_to_e) * log_s;
        out[euclidean] = x;
    }
    // Left-associated: exp(l * a) (+) h (+) exp(l * b).
    auto couple = [&](manifold_kind self, bool from_e, cross_slot e_slot, const tensor& other_log, cross_slot o_slot) {
        tensor x = in[self];
        if (from_e) x = gyro_add(self, exp0(self, lambda(e_slot) * in[euclidean]), x);
        if (other_log.defined()) x = gyro_add(self, x, exp0(self, lambda(o_slot) * other_log));
        return x;
    };
    if (h) out[hyperbolic] = couple(hyperbolic, e, e_to_h, s ? log_s : tensor(), s_to_h);
    if (s) out[spherical] = couple(spherical, e, e_to_s, h ? log_h : tensor(), h_to_s);
    return out;
}

manifold_state feature_transform(const manifold_state& in, const layer_params& p, const manifold_set& active,
                                 double dropout_p, std::mt19937_64* dropout_rng) {
    manifold_state out;
    for (auto k : all_manifolds) {
        if (!active.has(k)) continue;
        if (in[k].cols() != ambient_dim(k, p.weight.cols())) {
            throw dimension_error("feature_transform: state " + to_string(in[k].shape()) + " vs weight " +
                                  to_string(p.weight.shape()));
        }
        tensor t = log0(k, in[k]);
        if (dropout_rng) t = dropout(t, dropout_p, *dropout_rng);
        out[k] = exp0(k, matmul_nt(t, p.weight) + p.bias[slot(k)]);
    }
    return out;
}

manifold_state aggregate_neighbors(const manifold_state& in, std::shared_ptr<const csr_matrix> adjacency,
                                   const manifold_set& active, activation sigma) {
    manifold_state out;
    for (auto k : all_manifolds) {
        if (!active.has(k)) continue;
        tensor t = spmm(adjacency, log0(k, in[k]));
        if (sigma == activation::relu) t = relu(t);
        out[k] = exp0(k, t);
    }
    return out;
}

manifold_state fmgnn_layer(const manifold_state& in, const layer_params& p, std::shared_ptr<const csr_matrix> adjacency,
                           const manifold_set& active, activation sigma, double dropout_p,
                           std::mt19937_64* dropout_rng) {
    const manifold_state fused = fuse_manifolds(in, p, active);
    const manifold_state moved = feature_transform(fused, p, active, dropout_p, dropout_rng);
    return aggregate_neighbors(moved, std::move(adjacency), active, sigma);
}

manifold_state forward(std::shared_ptr<const csr_matrix> features, std::shared_ptr<const csr_matrix> adjacency,
                       const model_params& params, const model_config& cfg, std::mt19937_64* dropout_rng) {
    if (features->rows != adjacency->rows) throw dimension_error("forward: feature rows differ from node count");
    manifold_state s = lift_features(std::move(features), params.lift, cfg.manifolds);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const activation sigma = l + 1 < params.layers.size() ? activation::relu : activation::identity;
        s = fmgnn_layer(s, params.layers[l], adjacency, cfg.manifolds, sigma, cfg.dropout, dropout_rng);
    }
    return s;
}

std::vector<double> reference_gcn_forward(const csr_matrix& x, const csr_matrix& a, const model_params& params) {
    const std::size_t n = x.rows;
    std::size_t d = params.lift.cols();

    auto sparse_times = [n](const csr_matrix& m, const std::vector<double>& b, std::size_t cols) {
        std::vector<double> out(n * cols, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t e = m.row_ptr[i]; e < m.row_ptr[i + 1]; ++e)
                for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += m.values[e] * b[m.col_idx[e] * cols + j];
        return out;
    };

    const auto lift = params.lift.data();
    std::vector<double> h = sparse_times(x, std::vector<double>(lift.begin(), lift.end()), d);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& w = params.layers[l].weight;
        const auto bias = params.layers[l].bias[slot(manifold_kind::euclidean)].data();
        const std::size_t out_dim = w.rows();
        std::vector<double> t(n * out_dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < out_dim; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += h[i * d + k] * w(j, k);
                t[i * out_dim + j] = s + bias[j];
            }
        }
        h = sparse_times(a, t, out_dim);
        if (l + 1 < params.layers.size())
            for (double& v : h) v = v > 0.0 ? v : 0.0;
        d = out_dim;
    }
    return h;
}

} // namespace fmgnn

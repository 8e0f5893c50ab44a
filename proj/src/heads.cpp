#include "fmgnn/heads.hpp"

#include "fmgnn/errors.hpp"

#include <cmath>

namespace fmgnn {

using namespace ad;

namespace {

std::vector<tensor> stacked(const std::array<tensor, 3>& features) {
    std::vector<tensor> rows;
    for (const auto& f : features)
        if (f.defined()) rows.push_back(f);
    if (rows.empty()) throw contract_error("attention_fuse: no feature matrices");
    for (const auto& f : rows) {
        if (f.shape() != rows.front().shape()) throw dimension_error("attention_fuse: feature shapes differ");
    }
    return rows;
}

std::vector<tensor> weights_of(const std::vector<tensor>& m) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(m.front().cols()));
    std::vector<tensor> out;
    for (const auto& a : m) {
        std::vector<tensor> logits;
        for (const auto& b : m) logits.push_back(row_dot(a, b) * scale);
        out.push_back(softmax_rows(concat_cols(logits)));
    }
    return out;
}

} // namespace

std::vector<tensor> attention_weights(const std::array<tensor, 3>& features) { return weights_of(stacked(features)); }

tensor attention_fuse(const std::array<tensor, 3>& features) {
    const auto m = stacked(features);
    if (m.size() == 1) return m.front();
    const auto w = weights_of(m);
    tensor total;
    for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t b = 0; b < m.size(); ++b) {
            tensor term = slice_cols(w[a], b, b + 1) * m[b];
            total = total.defined() ? total + term : term;
        }
    }
    return total * (1.0 / static_cast<double>(m.size()));
}

tensor nc_log_probabilities(const tensor& fused, const tensor& w_nc) {
    return log_softmax_rows(matmul_nt(fused, w_nc));
}

tensor nc_probabilities(const tensor& fused, const tensor& w_nc) { return softmax_rows(matmul_nt(fused, w_nc)); }

double lp_probability(std::span<const double> a, std::span<const double> b, const fermi_dirac& fd) {
    if (a.size() != b.size()) throw dimension_error("lp_probability: vector lengths differ");
    if (!(fd.t > 0.0)) throw contract_error("lp_probability: temperature must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return 1.0 / (std::exp((d2 - fd.r) / fd.t) + 1.0);
}

tensor lp_logits(const tensor& fused, std::span<const edge> pairs, const fermi_dirac& fd) {
    if (!(fd.t > 0.0)) throw contract_error("lp_logits: temperature must be positive");
    std::vector<std::size_t> u, v;
    u.reserve(pairs.size());
    v.reserve(pairs.size());
    for (const auto& e : pairs) {
        u.push_back(e.u);
        v.push_back(e.v);
    }
    const tensor d2 = row_sq_norm(gather_rows(fused, u) - gather_rows(fused, v));
    return (fd.r - d2) * (1.0 / fd.t);
}

namespace {

std::vector<std::size_t> masked_labels(std::span<const int> labels, std::span<const std::size_t> mask,
                                       std::size_t classes) {
    if (mask.empty()) throw contract_error("nc_loss: empty mask");
    std::vector<std::size_t> out;
    out.reserve(mask.size());
    for (std::size_t i : mask) {
        if (i >= labels.size() || labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw contract_error("nc_loss: node " + std::to_string(i) + " has no valid label");
        }
        out.push_back(static_cast<std::size_t>(labels[i]));
    }
    return out;
}

} // namespace

tensor nc_loss(const tensor& log_probs, std::span<const int> labels, std::span<const std::size_t> mask) {
    const auto cls = masked_labels(labels, mask, log_probs.cols());
    return -mean(pick(gather_rows(log_probs, mask), cls));
}

double nc_loss_value(const tensor& log_probs, std::span<const int> labels, std::span<const std::size_t> mask) {
    no_grad_guard guard;
    return nc_loss(log_probs, labels, mask).item();
}

tensor nc_loss_from_probabilities(const tensor& probs, std::span<const int> labels, std::span<const std::size_t> mask) {
    const auto cls = masked_labels(labels, mask, probs.cols());
    return -mean(log(pick(gather_rows(probs, mask), cls)));
}

tensor lp_loss(const tensor& pos_logits, const tensor& neg_logits) {
    const std::size_t total = pos_logits.numel() + neg_logits.numel();
    if (pos_logits.numel() == 0 || neg_logits.numel() == 0) throw contract_error("lp_loss: empty pair set");
    // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    return (sum(softplus(-pos_logits)) + sum(softplus(neg_logits))) * (1.0 / static_cast<double>(total));
}

tensor lp_loss_from_probabilities(const tensor& pos_probs, const tensor& neg_probs) {
    const std::size_t total = pos_probs.numel() + neg_probs.numel();
    if (pos_probs.numel() == 0 || neg_probs.numel() == 0) throw contract_error("lp_loss: empty pair set");
    return -(sum(log(pos_probs)) + sum(log(1.0 - neg_probs))) * (1.0 / static_cast<double>(total));
}

} // namespace fmgnn

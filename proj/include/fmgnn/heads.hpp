#pragma once

// Attention fusion of the per-manifold distance features, and the node
// classification and link prediction heads with their losses.

#include "fmgnn/autodiff/ops.hpp"
#include "fmgnn/graph.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fmgnn {

/// Per node, stacks the m given rows into an m x k matrix M and returns the
/// mean row of softmax(M M^T / sqrt(k)) M. Undefined tensors are skipped, so
/// ablated manifolds simply drop out of the stack.
ad::tensor attention_fuse(const std::array<ad::tensor, 3>& features);

/// The attention weights: one n x m tensor per stacked row a, holding
/// softmax_b(<M_a, M_b> / sqrt(k)).
std::vector<ad::tensor> attention_weights(const std::array<ad::tensor, 3>& features);

/// Row-wise log softmax(E w^T), n x tau.
ad::tensor nc_log_probabilities(const ad::tensor& fused, const ad::tensor& w_nc);
/// Row-wise softmax(E w^T), n x tau.
ad::tensor nc_probabilities(const ad::tensor& fused, const ad::tensor& w_nc);

struct fermi_dirac {
    double r = 2.0;
    double t = 1.0;
};

/// 1 / (exp((d^2 - r) / t) + 1) for the Euclidean distance d of two rows.
double lp_probability(std::span<const double> a, std::span<const double> b, const fermi_dirac& fd);

/// The exponent (r - d^2) / t for each pair; the probability is its sigmoid.
ad::tensor lp_logits(const ad::tensor& fused, std::span<const edge> pairs, const fermi_dirac& fd);

/// Mean of -log p[label] over the masked nodes, from log-probabilities.
double nc_loss_value(const ad::tensor& log_probs, std::span<const int> labels, std::span<const std::size_t> mask);
ad::tensor nc_loss(const ad::tensor& log_probs, std::span<const int> labels, std::span<const std::size_t> mask);

/// Same loss from probabilities.
ad::tensor nc_loss_from_probabilities(const ad::tensor& probs, std::span<const int> labels,
                                      std::span<const std::size_t> mask);

/// Mean over every pair of -log p (positives) and -log(1 - p) (negatives),
/// evaluated from the logits so that saturated pairs stay finite.
ad::tensor lp_loss(const ad::tensor& pos_logits, const ad::tensor& neg_logits);

/// Same loss from probabilities (n x 1 each).
ad::tensor lp_loss_from_probabilities(const ad::tensor& pos_probs, const ad::tensor& neg_probs);

} // namespace fmgnn

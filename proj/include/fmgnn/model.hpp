#pragma once

// The fused three-manifold graph convolution stack.
//
// Each layer runs, in order: cross-manifold fusion, the shared-weight feature
// transform in origin-tangent coordinates, and normalised neighbourhood
// aggregation. Any subset of the three manifolds can be switched off.

#include "fmgnn/autodiff/ops.hpp"
#include "fmgnn/manifold.hpp"

#include <array>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fmgnn {

inline constexpr std::array<manifold_kind, 3> all_manifolds{manifold_kind::euclidean, manifold_kind::hyperbolic,
                                                           manifold_kind::spherical};

constexpr std::size_t slot(manifold_kind k) noexcept { return static_cast<std::size_t>(k); }

/// Which manifolds are active. Spelled with the letters E, H, S.
struct manifold_set {
    bool euclidean = true;
    bool hyperbolic = true;
    bool spherical = true;

    bool has(manifold_kind k) const noexcept {
        return k == manifold_kind::euclidean ? euclidean : k == manifold_kind::hyperbolic ? hyperbolic : spherical;
    }
    std::size_t count() const noexcept { return euclidean + hyperbolic + spherical; }
    std::string name() const;

    /// "E", "HS", "EHS", ...; throws contract_error on anything else.
    static manifold_set parse(std::string_view s);
    /// The seven non-empty subsets: E, H, S, EH, ES, HS, EHS.
    static std::array<manifold_set, 7> all_subsets();

    friend bool operator==(const manifold_set&, const manifold_set&) = default;
};

/// Positions of the six coupling scalars in layer_params::cross.
enum cross_slot : std::size_t { e_to_h = 0, e_to_s = 1, h_to_e = 2, h_to_s = 3, s_to_e = 4, s_to_h = 5 };

struct layer_params {
    ad::tensor weight;              // out x in, shared by every manifold
    std::array<ad::tensor, 3> bias; // 1 x out per manifold
    ad::tensor cross;               // 1 x 6
};

struct model_config {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 100;
    std::size_t num_layers = 2;
    double dropout = 0.5;
    manifold_set manifolds;
};

struct model_params {
    ad::tensor lift; // input_dim x hidden_dim
    std::vector<layer_params> layers;

    /// Every trainable tensor, in a fixed order.
    std::vector<ad::tensor> tensors() const;
    /// Deep copy with no history.
    model_params clone() const;
};

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, zero
/// coupling scalars.
model_params init_params(const model_config& cfg, std::mt19937_64& rng);

/// Per-manifold node states; inactive manifolds hold undefined tensors.
struct manifold_state {
    std::array<ad::tensor, 3> h;

    ad::tensor& operator[](manifold_kind k) { return h[slot(k)]; }
    const ad::tensor& operator[](manifold_kind k) const { return h[slot(k)]; }
};

enum class activation { relu, identity };

/// X * lift, then exp at the origin onto each active curved manifold.
manifold_state lift_features(std::shared_ptr<const ad::csr_matrix> features, const ad::tensor& lift,
                             const manifold_set& active);

/// Simultaneous coupling of the incoming states through the six scalars.
manifold_state fuse_manifolds(const manifold_state& in, const layer_params& p, const manifold_set& active);

/// exp0(W log0(h) + b) per manifold; Euclidean is W h + b. Dropout on the
/// tangent coordinates when `dropout_rng` is set.
manifold_state feature_transform(const manifold_state& in, const layer_params& p, const manifold_set& active,
                                 double dropout = 0.0, std::mt19937_64* dropout_rng = nullptr);

/// exp0(sigma(A log0(h))) per manifold; A includes the self-loop weight.
manifold_state aggregate_neighbors(const manifold_state& in, std::shared_ptr<const ad::csr_matrix> adjacency,
                                   const manifold_set& active, activation sigma);

/// One full layer.
manifold_state fmgnn_layer(const manifold_state& in, const layer_params& p,
                           std::shared_ptr<const ad::csr_matrix> adjacency, const manifold_set& active,
                           activation sigma, double dropout = 0.0, std::mt19937_64* dropout_rng = nullptr);

/// Lift plus every layer; ReLU on hidden layers, identity on the last.
/// Dropout applies only when `dropout_rng` is non-null (training).
manifold_state forward(std::shared_ptr<const ad::csr_matrix> features, std::shared_ptr<const ad::csr_matrix> adjacency,
                       const model_params& params, const model_config& cfg, std::mt19937_64* dropout_rng = nullptr);

/// Plain-loop graph convolution with the same parameters (Euclidean branch
/// only, no dropout): H <- A (H W^T + b), ReLU between layers.
std::vector<double> reference_gcn_forward(const ad::csr_matrix& features, const ad::csr_matrix& adjacency,
                                          const model_params& params);

} // namespace fmgnn

#pragma once

// Stability instrumentation: embedding centroids, centroid offset across
// training seeds, embedding scale and the normalised offset.

#include "fmgnn/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmgnn {

/// Distance between two rows in the given space.
double point_distance(manifold_kind space, std::span<const double> a, std::span<const double> b);

/// Column means. On a curved manifold the mean is taken in origin-tangent
/// coordinates and mapped back, so the centroid stays on the manifold.
std::vector<double> embedding_centroid(const ad::tensor& x, manifold_kind space = manifold_kind::euclidean);

/// Mean distance over the T(T-1)/2 unordered pairs. Throws contract_error
/// for fewer than two centroids.
double centroid_offset(const std::vector<std::vector<double>>& centroids,
                       manifold_kind space = manifold_kind::euclidean);

/// Mean distance from the rows of x to c.
double embedding_scale(const ad::tensor& x, std::span<const double> c, manifold_kind space = manifold_kind::euclidean);

struct stability_report {
    std::string model_tag;
    manifold_kind space = manifold_kind::euclidean;
    std::size_t runs = 0; // successful runs entering the statistics
    double scale = 0.0;   // averaged over runs
    double offset = 0.0;
    double normalized_offset = 0.0; // NaN when scale is 0
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> centroids;
    metric_kind metric = metric_kind::accuracy;
    std::vector<double> metrics;
    double metric_mean = 0.0;
    double metric_std = 0.0; // sample standard deviation
    bool complete = true;
    std::vector<std::string> failures;
};

/// Statistics over the final embeddings of several runs.
stability_report stability_from_embeddings(const std::vector<ad::tensor>& runs, manifold_kind space);

/// Embeddings the stability measures use: the fused output when more than
/// one manifold is active, otherwise that manifold's own final states.
ad::tensor stability_embedding(const evaluation& ev, const manifold_set& active, manifold_kind* space = nullptr);

/// Trains once per seed (up to `jobs` at a time) on a fixed split. A run
/// that fails is listed in `failures` and the report is marked incomplete.
/// Throws contract_error for fewer than two seeds.
stability_report seed_sweep(const graph& g, const split_manifest& split, const train_config& cfg,
                            std::span<const std::uint64_t> seeds, int jobs = 1);

nlohmann::json to_json(const stability_report& r);

/// "i,j,distance" rows for every unordered pair of run centroids.
std::string centroid_pairs_csv(const stability_report& r);

} // namespace fmgnn

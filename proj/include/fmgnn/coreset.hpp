#pragma once

// Geometric coresets: Lloyd k-means over random candidate points, pushed to
// each manifold through the exponential map at the origin, and the distance
// features that replace node coordinates by distances to those centroids.

#include "fmgnn/autodiff/tensor.hpp"
#include "fmgnn/model.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fmgnn {

struct coreset_config {
    std::size_t candidates = 1000; // n
    std::size_t k = 100;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 300;
    double tolerance = 1e-10;
};

/// n i.i.d. N(0, 1/dim) vectors, row-major.
std::vector<double> sample_candidates(std::size_t n, std::size_t dim, std::mt19937_64& rng);

struct kmeans_options {
    std::size_t k = 1;
    std::size_t max_iterations = 300;
    double tolerance = 1e-10; // stop when no centroid moves this far
    std::size_t restarts = 1; // independent random initialisations; the cheapest result wins
};

struct kmeans_result {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids; // k x dim
    std::vector<std::size_t> assignment;
    std::vector<double> cost_history; // cost after each assignment step of the winning run
    std::size_t iterations = 0;
    bool converged = false;

    double cost() const { return cost_history.empty() ? 0.0 : cost_history.back(); }
};

/// Lloyd iterations in Euclidean coordinates. Initial centroids are k
/// distinct points drawn at random; assignment ties go to the lowest index;
/// an emptied cluster is re-seeded with the point farthest from its centroid.
/// Throws contract_error when k exceeds the number of distinct points.
kmeans_result lloyd_kmeans(std::span<const double> points, std::size_t dim, const kmeans_options& opt,
                           std::mt19937_64& rng);

/// Index of the closest centroid; ties go to the lowest index.
std::size_t nearest_centroid(std::span<const double> point, std::span<const double> centroids);

/// Sum of squared distances from each point to its nearest centroid.
double kmeans_cost(std::span<const double> points, std::size_t dim, std::span<const double> centroids);

struct coreset_atlas {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t dim = 0;
    std::array<ad::tensor, 3> centroids; // k x ambient_dim(kind, dim), never trained

    const ad::tensor& operator[](manifold_kind kind) const { return centroids[slot(kind)]; }
};

/// One candidate set and one k-means run (seed stream "atlas"), pushed to
/// every manifold's origin.
coreset_atlas build_atlas(const coreset_config& cfg, std::size_t dim);

/// Throws domain_error if a centroid is off its manifold by more than tol.
void validate_atlas(const coreset_atlas& atlas, double tol = 1e-7);

/// Node-by-centroid distance matrices for each active manifold.
std::array<ad::tensor, 3> distance_features(const manifold_state& embeddings, const coreset_atlas& atlas,
                                            const manifold_set& active);

std::string atlas_to_json(const coreset_atlas& atlas);
coreset_atlas atlas_from_json(const std::string& text);

} // namespace fmgnn

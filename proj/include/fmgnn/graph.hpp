#pragma once

// Undirected attributed graphs, aggregation weights, and transductive splits.
//
// Text formats (UTF-8, whitespace separated, blank lines and lines starting
// with '#' ignored):
//   edges     "u v"                  one undirected edge per line
//   features  "id x_1 ... x_d"       one node per line, ids 0..n-1
//   labels    "id label"             label in [0, tau) or -1 for unlabeled

#include "fmgnn/autodiff/ops.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

namespace fmgnn {

/// Undirected edge stored with u < v.
struct edge {
    std::size_t u = 0;
    std::size_t v = 0;

    friend bool operator==(const edge&, const edge&) = default;
    friend auto operator<=>(const edge&, const edge&) = default;
};

inline edge make_edge(std::size_t a, std::size_t b) noexcept { return a < b ? edge{a, b} : edge{b, a}; }

struct graph {
    std::size_t num_nodes = 0;
    std::vector<edge> edges; // sorted, unique, no self-loops
    std::size_t feature_dim = 0;
    std::vector<double> features; // num_nodes x feature_dim, row-major
    std::vector<int> labels;      // -1 = unlabeled
    int num_classes = 0;

    std::span<const double> feature_row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * feature_dim, feature_dim);
    }
};

/// Canonicalises edges (orders endpoints, drops self-loops and duplicates),
/// checks ranges and derives num_classes from the labels.
graph make_graph(std::size_t num_nodes, std::vector<edge> edges, std::size_t feature_dim,
                 std::vector<double> features, std::vector<int> labels);

graph load_graph(const std::filesystem::path& edges_path, const std::filesystem::path& features_path,
                 const std::filesystem::path& labels_path);

/// Writes the three text files that load_graph reads back exactly.
void save_graph(const graph& g, const std::filesystem::path& edges_path,
                const std::filesystem::path& features_path, const std::filesystem::path& labels_path);

/// Scales every feature row to unit L1 norm; all-zero rows are left alone.
void row_normalize_features(graph& g);

/// Features as a constant sparse matrix (zeros dropped).
ad::csr_matrix feature_matrix(const graph& g);

/// Self-loop augmented symmetric normalisation: entry (i, j) is
/// 1/sqrt(d_i d_j) with d counting the self-loop. Columns are sorted within
/// each row.
ad::csr_matrix normalize_adjacency(std::size_t num_nodes, std::span<const edge> edges);
inline ad::csr_matrix normalize_adjacency(const graph& g) { return normalize_adjacency(g.num_nodes, g.edges); }

/// Membership test over undirected edges.
class edge_set {
public:
    edge_set() = default;
    edge_set(std::size_t num_nodes, std::span<const edge> edges);

    bool contains(std::size_t a, std::size_t b) const {
        return set_.contains(key(make_edge(a, b)));
    }
    bool insert(edge e) { return set_.insert(key(e)).second; }
    std::size_t size() const noexcept { return set_.size(); }

private:
    std::uint64_t key(edge e) const noexcept { return static_cast<std::uint64_t>(e.u) * n_ + e.v; }

    std::uint64_t n_ = 0;
    std::unordered_set<std::uint64_t> set_;
};

/// Draws `count` distinct non-edges uniformly, avoiding `taken` and
/// everything in `excluded`. Dense requests enumerate all candidates.
/// Throws split_error when fewer than `count` remain.
std::vector<edge> sample_negatives(std::size_t num_nodes, const edge_set& taken, std::size_t count,
                                   std::mt19937_64& rng, const edge_set* excluded = nullptr);

enum class task_kind { nc, lp };

std::string_view to_string(task_kind t) noexcept;
task_kind parse_task(std::string_view s);

/// Random stratified split: `per_class` training nodes per class, then
/// `val` and `test` nodes from the remaining labeled nodes.
struct planetoid_policy {
    std::size_t per_class = 20;
    std::size_t val = 500;
    std::size_t test = 1000;
};

/// floor(p_train * n) training and floor(p_val * n) validation nodes out of
/// the n labeled nodes; the rest is test.
struct fractional_policy {
    double p_train = 0.0;
    double p_val = 0.0;
};

using nc_policy = std::variant<planetoid_policy, fractional_policy>;

struct split_manifest {
    task_kind task = task_kind::nc;
    std::uint64_t seed = 0;
    // node classification
    std::vector<std::size_t> train_nodes;
    std::vector<std::size_t> val_nodes;
    std::vector<std::size_t> test_nodes;
    // link prediction
    std::vector<edge> train_edges;
    std::vector<edge> val_edges;
    std::vector<edge> test_edges;
    std::vector<edge> val_negatives;
    std::vector<edge> test_negatives;
};

split_manifest make_nc_split(const graph& g, const nc_policy& policy, std::uint64_t seed);

/// 85/5/10 edge split. Validation and test positives are removed from the
/// training edges; each gets an equal number of non-edge negatives, disjoint
/// across the two.
split_manifest make_lp_split(const graph& g, std::uint64_t seed);

/// Checks the manifest against the graph (ranges, disjointness, negatives
/// absent from the graph). Throws split_error.
void validate_split(const graph& g, const split_manifest& s);

std::string split_to_json(const split_manifest& s);
split_manifest split_from_json(const std::string& text);

/// Planted-partition graph with class-correlated sparse binary features,
/// shaped like a small citation network.
struct synthetic_config {
    std::size_t num_nodes = 300;
    int num_classes = 3;
    std::size_t feature_dim = 64;
    double average_degree = 4.0;
    double homophily = 0.8;      // fraction of edges inside a class
    double feature_density = 0.1; // fraction of a class's own feature block that is on
    double feature_noise = 0.02;  // probability of any other feature being on
};

graph make_synthetic_graph(const synthetic_config& cfg, std::uint64_t seed);

} // namespace fmgnn

#include "fmgnn/coreset.hpp"

#include "fmgnn/errors.hpp"
#include "fmgnn/manifold_ops.hpp"
#include "fmgnn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace fmgnn {

std::vector<double> sample_candidates(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    std::vector<double> out(n * dim);
    for (double& x : out) x = g(rng);
    return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
        const double d = a[t] - b[t];
        s += d * d;
    }
    return s;
}

// Assigns every point to its nearest centroid; returns the cost.
double assign(std::span<const double> points, std::size_t dim, const std::vector<double>& centroids, std::size_t k,
              std::vector<std::size_t>& assignment, std::vector<double>& best) {
    const std::size_t n = points.size() / dim;
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t arg = nearest_centroid(points.subspan(i * dim, dim), std::span(centroids).first(k * dim));
        const double m = sq_dist(points.data() + i * dim, centroids.data() + arg * dim, dim);
        assignment[i] = arg;
        best[i] = m;
        cost += m;
    }
    return cost;
}

kmeans_result lloyd_once(std::span<const double> points, std::size_t dim, const std::vector<std::size_t>& distinct,
                         const kmeans_options& opt, std::mt19937_64& rng) {
    const std::size_t n = points.size() / dim;
    const std::size_t k = opt.k;
    kmeans_result r;
    r.k = k;
    r.dim = dim;
    r.centroids.resize(k * dim);
    r.assignment.assign(n, 0);

    std::vector<std::size_t> order = distinct;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c = 0; c < k; ++c)
        std::copy_n(points.data() + order[c] * dim, dim, r.centroids.data() + c * dim);

    std::vector<double> best(n);
    std::vector<double> next(k * dim);
    std::vector<std::size_t> count(k);
    for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
        r.cost_history.push_back(assign(points, dim, r.centroids, k, r.assignment, best));

        std::fill(next.begin(), next.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = r.assignment[i];
            ++count[c];
            for (std::size_t t = 0; t < dim; ++t) next[c * dim + t] += points[i * dim + t];
        }
        std::vector<bool> reseeded(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0) {
                for (std::size_t t = 0; t < dim; ++t) next[c * dim + t] /= static_cast<double>(count[c]);
                continue;
            }
            std::size_t far = 0;
            double m = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!reseeded[i] && best[i] > m) {
                    m = best[i];
                    far = i;
                }
            }
            reseeded[far] = true;
            best[far] = 0.0;
            std::copy_n(points.data() + far * dim, dim, next.data() + c * dim);
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            shift = std::max(shift, std::sqrt(sq_dist(next.data() + c * dim, r.centroids.data() + c * dim, dim)));
        r.centroids.swap(next);
        if (shift < opt.tolerance) {
            r.converged = true;
            ++r.iterations;
            break;
        }
    }
    r.cost_history.push_back(assign(points, dim, r.centroids, k, r.assignment, best));
    return r;
}

} // namespace

std::size_t nearest_centroid(std::span<const double> point, std::span<const double> centroids) {
    const std::size_t dim = point.size();
    if (dim == 0 || centroids.size() % dim != 0 || centroids.empty()) {
        throw dimension_error("nearest_centroid: centroids are not rows of the point's length");
    }
    std::size_t arg = 0;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size() / dim; ++c) {
        const double d = sq_dist(point.data(), centroids.data() + c * dim, dim);
        if (d < m) {
            m = d;
            arg = c;
        }
    }
    return arg;
}

double kmeans_cost(std::span<const double> points, std::size_t dim, std::span<const double> centroids) {
    const std::size_t n = points.size() / dim, k = centroids.size() / dim;
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) m = std::min(m, sq_dist(points.data() + i * dim, centroids.data() + c * dim, dim));
        cost += m;
    }
    return cost;
}

kmeans_result lloyd_kmeans(std::span<const double> points, std::size_t dim, const kmeans_options& opt,
                           std::mt19937_64& rng) {
    if (dim == 0 || points.size() % dim != 0) throw dimension_error("lloyd_kmeans: points are not rows of length dim");
    if (opt.k == 0 || opt.restarts == 0) throw contract_error("lloyd_kmeans: k and restarts must be positive");
    if (!(opt.tolerance > 0.0)) throw contract_error("lloyd_kmeans: tolerance must be positive");
    const std::size_t n = points.size() / dim;

    // First occurrence of every distinct point.
    std::vector<std::size_t> distinct;
    std::set<std::vector<double>> seen;
    for (std::size_t i = 0; i < n; ++i) {
        if (seen.emplace(points.begin() + i * dim, points.begin() + (i + 1) * dim).second) distinct.push_back(i);
    }
    if (opt.k > distinct.size()) {
        throw contract_error("lloyd_kmeans: infeasible, k = " + std::to_string(opt.k) + " exceeds " +
                             std::to_string(distinct.size()) + " distinct points");
    }

    kmeans_result best;
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        auto run = lloyd_once(points, dim, distinct, opt, rng);
        if (r == 0 || run.cost() < best.cost()) best = std::move(run);
    }
    return best;
}

coreset_atlas build_atlas(const coreset_config& cfg, std::size_t dim) {
    if (cfg.k == 0 || cfg.k > cfg.candidates) throw contract_error("coreset: need 1 <= k <= candidates");
    if (!(cfg.tolerance > 0.0)) throw contract_error("coreset: tolerance must be positive");
    if (dim == 0) throw contract_error("coreset: dimension must be positive");
    auto rng = seed_tree(cfg.seed).stream("atlas");
    const auto points = sample_candidates(cfg.candidates, dim, rng);
    const auto km = lloyd_kmeans(points, dim, {cfg.k, cfg.max_iterations, cfg.tolerance, 1}, rng);

    coreset_atlas a;
    a.seed = cfg.seed;
    a.k = cfg.k;
    a.n = cfg.candidates;
    a.dim = dim;
    const ad::tensor tangent({cfg.k, dim}, km.centroids);
    ad::no_grad_guard guard;
    for (auto kind : all_manifolds) a.centroids[slot(kind)] = exp0(kind, tangent).detach();
    return a;
}

void validate_atlas(const coreset_atlas& atlas, double tol) {
    for (auto kind : all_manifolds) {
        const auto& c = atlas[kind];
        if (!c.defined() || c.rows() != atlas.k || c.cols() != ambient_dim(kind, atlas.dim)) {
            throw dimension_error("atlas: " + std::string(to_string(kind)) + " centroids have the wrong shape");
        }
        const double v = max_constraint_violation(kind, c);
        if (!(v <= tol)) {
            throw domain_error("atlas: " + std::string(to_string(kind)) + " centroid off the manifold by " +
                               std::to_string(v));
        }
    }
}

std::array<ad::tensor, 3> distance_features(const manifold_state& embeddings, const coreset_atlas& atlas,
                                            const manifold_set& active) {
    std::array<ad::tensor, 3> out;
    for (auto kind : all_manifolds) {
        if (active.has(kind)) out[slot(kind)] = distance_matrix(kind, embeddings[kind], atlas[kind]);
    }
    return out;
}

std::string atlas_to_json(const coreset_atlas& atlas) {
    nlohmann::json j;
    j["seed"] = atlas.seed;
    j["k"] = atlas.k;
    j["n"] = atlas.n;
    j["dim"] = atlas.dim;
    for (auto kind : all_manifolds) j["centroids"][std::string(to_string(kind))] = atlas[kind].to_rows();
    return j.dump();
}

coreset_atlas atlas_from_json(const std::string& text) {
    coreset_atlas a;
    try {
        const auto j = nlohmann::json::parse(text);
        a.seed = j.at("seed").get<std::uint64_t>();
        a.k = j.at("k").get<std::size_t>();
        a.n = j.at("n").get<std::size_t>();
        a.dim = j.at("dim").get<std::size_t>();
        for (auto kind : all_manifolds) {
            const auto rows = j.at("centroids").at(std::string(to_string(kind))).get<std::vector<std::vector<double>>>();
            if (rows.size() != a.k) throw dimension_error("atlas: centroid count differs from k");
            a.centroids[slot(kind)] = ad::tensor::from_rows(rows);
        }
    } catch (const nlohmann::json::exception& e) {
        throw contract_error(std::string("atlas: ") + e.what());
    }
    validate_atlas(a);
    return a;
}

} // namespace fmgnn

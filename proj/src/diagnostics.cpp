#include "fmgnn/diagnostics.hpp"

#include "fmgnn/errors.hpp"
#include "fmgnn/manifold_ops.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace fmgnn {

using ad::tensor;

double point_distance(manifold_kind space, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw dimension_error("point_distance: lengths differ");
    if (space == manifold_kind::euclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    }
    return dist(manifold_point{space, {a.begin(), a.end()}}, manifold_point{space, {b.begin(), b.end()}});
}

std::vector<double> embedding_centroid(const tensor& x, manifold_kind space) {
    if (!x.defined() || x.rows() == 0) throw contract_error("embedding_centroid: no rows");
    ad::no_grad_guard guard;
    const tensor rows = space == manifold_kind::euclidean ? x : log0(space, x);
    std::vector<double> mean(rows.cols(), 0.0);
    for (std::size_t i = 0; i < rows.rows(); ++i)
        for (std::size_t t = 0; t < rows.cols(); ++t) mean[t] += rows(i, t);
    for (double& m : mean) m /= static_cast<double>(rows.rows());
    if (space == manifold_kind::euclidean) return mean;
    const auto back = exp0(space, tensor({1, mean.size()}, mean));
    return {back.data().begin(), back.data().end()};
}

double centroid_offset(const std::vector<std::vector<double>>& centroids, manifold_kind space) {
    const std::size_t t = centroids.size();
    if (t < 2) throw contract_error("centroid_offset: need at least two centroids");
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = i + 1; j < t; ++j) total += point_distance(space, centroids[i], centroids[j]);
    return total / static_cast<double>(t * (t - 1) / 2);
}

double embedding_scale(const tensor& x, std::span<const double> c, manifold_kind space) {
    if (!x.defined() || x.rows() == 0) throw contract_error("embedding_scale: no rows");
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) total += point_distance(space, x.row_span(i), c);
    return total / static_cast<double>(x.rows());
}

stability_report stability_from_embeddings(const std::vector<tensor>& runs, manifold_kind space) {
    if (runs.size() < 2) throw contract_error("stability: need at least two runs");
    stability_report r;
    r.space = space;
    r.runs = runs.size();
    double scale = 0.0;
    for (const auto& x : runs) {
        r.centroids.push_back(embedding_centroid(x, space));
        scale += embedding_scale(x, r.centroids.back(), space);
    }
    r.scale = scale / static_cast<double>(runs.size());
    r.offset = centroid_offset(r.centroids, space);
    r.normalized_offset = r.scale > 0.0 ? r.offset / r.scale : std::numeric_limits<double>::quiet_NaN();
    return r;
}

tensor stability_embedding(const evaluation& ev, const manifold_set& active, manifold_kind* space) {
    if (active.count() == 1) {
        for (auto kind : all_manifolds) {
            if (!active.has(kind)) continue;
            if (space) *space = kind;
            return ev.embeddings[kind];
        }
    }
    if (space) *space = manifold_kind::euclidean;
    return ev.fused;
}

stability_report seed_sweep(const graph& g, const split_manifest& split, const train_config& cfg,
                            std::span<const std::uint64_t> seeds, int jobs) {
    if (seeds.size() < 2) throw contract_error("seed_sweep: need at least two seeds");
    cfg.validate();

    struct outcome {
        tensor embedding;
        double metric = 0.0;
        std::string failure;
    };
    std::vector<outcome> out(seeds.size());
    manifold_kind space = manifold_kind::euclidean;
    stability_embedding(evaluation{}, cfg.manifolds, &space);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                auto run_cfg = cfg;
                run_cfg.seed = seeds[i];
                auto result = train(g, split, run_cfg);
                auto ev = evaluate(g, result.best);
                out[i].embedding = stability_embedding(ev, cfg.manifolds);
                out[i].metric = result.report.test_metric;
            } catch (const std::exception& e) {
                out[i].failure = "seed " + std::to_string(seeds[i]) + ": " + e.what();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(jobs < 1 ? 1 : jobs, seeds.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<tensor> embeddings;
    std::vector<std::uint64_t> ok_seeds;
    std::vector<double> metrics;
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!out[i].failure.empty()) {
            failures.push_back(out[i].failure);
            continue;
        }
        embeddings.push_back(out[i].embedding);
        ok_seeds.push_back(seeds[i]);
        metrics.push_back(out[i].metric);
    }

    stability_report r;
    if (embeddings.size() >= 2) {
        r = stability_from_embeddings(embeddings, space);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.space = space;
        r.runs = embeddings.size();
        r.scale = r.offset = r.normalized_offset = nan;
    }
    r.model_tag = cfg.manifolds.name();
    r.seeds = ok_seeds;
    r.metric = metric_for(cfg.task, g.num_classes);
    r.metrics = metrics;
    r.failures = failures;
    r.complete = failures.empty();
    if (!metrics.empty()) {
        double m = 0.0;
        for (double v : metrics) m += v;
        m /= static_cast<double>(metrics.size());
        double v2 = 0.0;
        for (double v : metrics) v2 += (v - m) * (v - m);
        r.metric_mean = m;
        r.metric_std = metrics.size() > 1 ? std::sqrt(v2 / static_cast<double>(metrics.size() - 1)) : 0.0;
    }
    return r;
}

nlohmann::json to_json(const stability_report& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return nlohmann::json{{"model_tag", r.model_tag},
                          {"space", std::string(to_string(r.space))},
                          {"T", r.runs},
                          {"scale", num(r.scale)},
                          {"offset", num(r.offset)},
                          {"normalized_offset", num(r.normalized_offset)},
                          {"seeds", r.seeds},
                          {"centroids", r.centroids},
                          {"metric_name", std::string(to_string(r.metric))},
                          {"metrics", r.metrics},
                          {"metric_mean", num(r.metric_mean)},
                          {"metric_std", num(r.metric_std)},
                          {"complete", r.complete},
                          {"failures", r.failures}};
}

std::string centroid_pairs_csv(const stability_report& r) {
    std::ostringstream os;
    os.precision(17);
    os << "i,j,distance\n";
    for (std::size_t i = 0; i < r.centroids.size(); ++i)
        for (std::size_t j = i + 1; j < r.centroids.size(); ++j)
            os << i << ',' << j << ',' << point_distance(r.space, r.centroids[i], r.centroids[j]) << '\n';
    return os.str();
}

} // namespace fmgnn

#include "fmgnn/training.hpp"

#include "fmgnn/autodiff/optim.hpp"
#include "fmgnn/errors.hpp"
#include "fmgnn/rng.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

namespace fmgnn {

using ad::tensor;
using nlohmann::json;

// ---- configuration ---------------------------------------------------------

void train_config::validate() const {
    auto bad = [](const std::string& field, const std::string& why) { throw config_error(field + ": " + why); };
    if (epochs < 1) bad("epochs", "must be at least 1");
    if (patience < 1) bad("patience", "must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("learning_rate", "must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) bad("weight_decay", "must be finite and >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout", "must lie in [0, 1)");
    if (hidden_dim < 1) bad("hidden_dim", "must be at least 1");
    if (num_layers < 1) bad("num_layers", "must be at least 1");
    if (coreset_k < 1) bad("coreset_k", "must be at least 1");
    if (candidates < coreset_k) bad("candidates", "must be at least coreset_k");
    if (!std::isfinite(fermi_r)) bad("fermi_r", "must be finite");
    if (!(fermi_t > 0.0) || !std::isfinite(fermi_t)) bad("fermi_t", "must be positive");
    if (manifolds.count() == 0) bad("manifolds", "at least one manifold must be active");
}

json to_json(const train_config& c) {
    return json{{"task", std::string(to_string(c.task))},
                {"epochs", c.epochs},
                {"patience", c.patience},
                {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"dropout", c.dropout},
                {"hidden_dim", c.hidden_dim},
                {"num_layers", c.num_layers},
                {"coreset_k", c.coreset_k},
                {"candidates", c.candidates},
                {"seed", c.seed},
                {"fermi_r", c.fermi_r},
                {"fermi_t", c.fermi_t},
                {"manifolds", c.manifolds.name()}};
}

namespace {

double as_real(const json& v, const std::string& key) {
    if (!v.is_number()) throw config_error(key + ": expected a number");
    return v.get<double>();
}

template <class Int>
Int as_int(const json& v, const std::string& key, bool allow_negative = false) {
    if (!v.is_number_integer()) throw config_error(key + ": expected an integer");
    if (!allow_negative && v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) {
        throw config_error(key + ": must not be negative");
    }
    return v.get<Int>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw config_error(key + ": expected a string");
    return v.get<std::string>();
}

} // namespace

train_config train_config_from_json(const json& j, train_config c) {
    if (!j.is_object()) throw config_error("training configuration must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "task") {
            try {
                c.task = parse_task(as_string(v, key));
            } catch (const config_error&) {
                throw;
            } catch (const error& e) {
                throw config_error("task: " + std::string(e.what()));
            }
        } else if (key == "epochs") {
            c.epochs = as_int<int>(v, key);
        } else if (key == "patience") {
            c.patience = as_int<int>(v, key);
        } else if (key == "learning_rate") {
            c.learning_rate = as_real(v, key);
        } else if (key == "weight_decay") {
            c.weight_decay = as_real(v, key);
        } else if (key == "dropout") {
            c.dropout = as_real(v, key);
        } else if (key == "hidden_dim") {
            c.hidden_dim = as_int<std::size_t>(v, key);
        } else if (key == "num_layers") {
            c.num_layers = as_int<std::size_t>(v, key);
        } else if (key == "coreset_k") {
            c.coreset_k = as_int<std::size_t>(v, key);
        } else if (key == "candidates") {
            c.candidates = as_int<std::size_t>(v, key);
        } else if (key == "seed") {
            c.seed = as_int<std::uint64_t>(v, key);
        } else if (key == "fermi_r") {
            c.fermi_r = as_real(v, key);
        } else if (key == "fermi_t") {
            c.fermi_t = as_real(v, key);
        } else if (key == "manifolds") {
            try {
                c.manifolds = manifold_set::parse(as_string(v, key));
            } catch (const config_error&) {
                throw;
            } catch (const error& e) {
                throw config_error("manifolds: " + std::string(e.what()));
            }
        } else {
            throw config_error("unknown configuration key '" + key + "'");
        }
    }
    return c;
}

void apply_override(train_config& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) v = text;
    c = train_config_from_json(json{{key, v}}, c);
}

json to_json(const run_report& r, bool with_timing) {
    json curve = json::array();
    for (const auto& e : r.curve) curve.push_back({e.epoch, e.train_loss, e.val_metric});
    json j{{"metric_name", std::string(to_string(r.metric))},
           {std::string(to_string(r.metric)), r.test_metric},
           {"test_metric", r.test_metric},
           {"best_val_metric", r.best_val_metric},
           {"best_epoch", r.best_epoch},
           {"epochs_run", r.epochs_run},
           {"early_stopped", r.early_stopped},
           {"seed", r.config.seed},
           {"config", to_json(r.config)},
           {"epoch_curve", curve}};
    if (with_timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

metric_kind metric_for(task_kind task, int num_classes) {
    if (task == task_kind::lp) return metric_kind::roc_auc;
    return num_classes == 2 ? metric_kind::f1_binary : metric_kind::accuracy;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

json rows_of(const tensor& t) { return t.to_rows(); }

tensor tensor_of(const json& j, std::size_t rows, std::size_t cols, const char* what) {
    auto r = j.get<std::vector<std::vector<double>>>();
    if (r.size() != rows) throw dimension_error(std::string("checkpoint: ") + what + " has the wrong row count");
    for (const auto& row : r)
        if (row.size() != cols) throw dimension_error(std::string("checkpoint: ") + what + " has the wrong column count");
    return tensor({rows, cols}, [&] {
        std::vector<double> flat;
        flat.reserve(rows * cols);
        for (const auto& row : r) flat.insert(flat.end(), row.begin(), row.end());
        return flat;
    }(), true);
}

} // namespace

std::string checkpoint_to_json(const trained_model& m) {
    json layers = json::array();
    for (const auto& l : m.params.layers) {
        json bias;
        for (auto kind : all_manifolds) bias[std::string(to_string(kind))] = rows_of(l.bias[slot(kind)]);
        layers.push_back({{"weight", rows_of(l.weight)}, {"bias", bias}, {"cross", rows_of(l.cross)}});
    }
    json j{{"format", "fmgnn-checkpoint"},
           {"version", 1},
           {"config", to_json(m.config)},
           {"num_nodes", m.num_nodes},
           {"feature_dim", m.model.input_dim},
           {"num_classes", m.num_classes},
           {"epoch", m.epoch},
           {"metric", std::string(to_string(m.metric))},
           {"val_metric", m.val_metric},
           {"test_metric", m.test_metric},
           {"params", {{"lift", rows_of(m.params.lift)}, {"layers", layers}}},
           {"w_nc", m.w_nc.defined() ? rows_of(m.w_nc) : json(nullptr)},
           {"atlas", json::parse(atlas_to_json(m.atlas))},
           {"split", json::parse(split_to_json(m.split))}};
    return j.dump();
}

trained_model checkpoint_from_json(const std::string& text) {
    trained_model m;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "fmgnn-checkpoint") throw contract_error("checkpoint: not a checkpoint file");
        m.config = train_config_from_json(j.at("config"));
        m.config.validate();
        m.num_nodes = j.at("num_nodes").get<std::size_t>();
        m.num_classes = j.at("num_classes").get<int>();
        m.epoch = j.at("epoch").get<int>();
        m.metric = parse_metric(j.at("metric").get<std::string>());
        m.val_metric = j.at("val_metric").get<double>();
        m.test_metric = j.at("test_metric").get<double>();
        m.model = model_config{.input_dim = j.at("feature_dim").get<std::size_t>(),
                               .hidden_dim = m.config.hidden_dim,
                               .num_layers = m.config.num_layers,
                               .dropout = m.config.dropout,
                               .manifolds = m.config.manifolds};
        const auto& p = j.at("params");
        const std::size_t h = m.model.hidden_dim;
        m.params.lift = tensor_of(p.at("lift"), m.model.input_dim, h, "lift");
        const auto& layers = p.at("layers");
        if (layers.size() != m.model.num_layers) throw dimension_error("checkpoint: layer count differs from config");
        for (const auto& l : layers) {
            layer_params q;
            q.weight = tensor_of(l.at("weight"), h, h, "weight");
            for (auto kind : all_manifolds)
                q.bias[slot(kind)] = tensor_of(l.at("bias").at(std::string(to_string(kind))), 1, h, "bias");
            q.cross = tensor_of(l.at("cross"), 1, 6, "cross");
            m.params.layers.push_back(std::move(q));
        }
        if (m.config.task == task_kind::nc) {
            m.w_nc = tensor_of(j.at("w_nc"), static_cast<std::size_t>(m.num_classes), m.config.coreset_k, "w_nc");
        }
        m.atlas = atlas_from_json(j.at("atlas").dump());
        if (m.atlas.k != m.config.coreset_k || m.atlas.dim != h) {
            throw dimension_error("checkpoint: atlas does not match the model dimensions");
        }
        m.split = split_from_json(j.at("split").dump());
    } catch (const json::exception& e) {
        throw contract_error(std::string("checkpoint: ") + e.what());
    } catch (const config_error& e) {
        throw contract_error(std::string("checkpoint: ") + e.what());
    }
    return m;
}

// ---- forward pipeline and evaluation ----------------------------------------

namespace {

struct context {
    const graph& g;
    const split_manifest& split;
    std::shared_ptr<const ad::csr_matrix> features;
    std::shared_ptr<const ad::csr_matrix> adjacency;
};

context make_context(const graph& g, const split_manifest& split) {
    auto x = std::make_shared<const ad::csr_matrix>(feature_matrix(g));
    auto a = std::make_shared<const ad::csr_matrix>(
        split.task == task_kind::lp ? normalize_adjacency(g.num_nodes, split.train_edges) : normalize_adjacency(g));
    return {g, split, std::move(x), std::move(a)};
}

struct pipeline_output {
    manifold_state embeddings;
    tensor fused;
};

pipeline_output run_pipeline(const context& ctx, const model_params& params, const model_config& mcfg,
                             const coreset_atlas& atlas, std::mt19937_64* dropout_rng) {
    pipeline_output out;
    out.embeddings = forward(ctx.features, ctx.adjacency, params, mcfg, dropout_rng);
    out.fused = attention_fuse(distance_features(out.embeddings, atlas, mcfg.manifolds));
    return out;
}

double lp_metric(const tensor& fused, std::span<const edge> pos, std::span<const edge> neg, const fermi_dirac& fd) {
    const auto p = lp_logits(fused, pos, fd), n = lp_logits(fused, neg, fd);
    std::vector<double> scores(p.data().begin(), p.data().end());
    scores.insert(scores.end(), n.data().begin(), n.data().end());
    std::vector<int> labels(pos.size(), 1);
    labels.resize(pos.size() + neg.size(), 0);
    return roc_auc(scores, labels);
}

double nc_metric(metric_kind metric, std::span<const int> preds, std::span<const int> labels,
                 std::span<const std::size_t> mask) {
    return metric == metric_kind::f1_binary ? f1_binary(preds, labels, mask) : accuracy(preds, labels, mask);
}

evaluation evaluate_with(const context& ctx, const model_params& params, const model_config& mcfg,
                         const coreset_atlas& atlas, const tensor& w_nc, const train_config& cfg, metric_kind metric) {
    ad::no_grad_guard guard;
    evaluation ev;
    auto out = run_pipeline(ctx, params, mcfg, atlas, nullptr);
    if (cfg.task == task_kind::nc) {
        const auto logp = nc_log_probabilities(out.fused, w_nc);
        ev.predictions = argmax_rows(logp.data(), logp.cols());
        ev.val_metric = nc_metric(metric, ev.predictions, ctx.g.labels, ctx.split.val_nodes);
        ev.test_metric = nc_metric(metric, ev.predictions, ctx.g.labels, ctx.split.test_nodes);
    } else {
        const fermi_dirac fd{cfg.fermi_r, cfg.fermi_t};
        ev.val_metric = lp_metric(out.fused, ctx.split.val_edges, ctx.split.val_negatives, fd);
        ev.test_metric = lp_metric(out.fused, ctx.split.test_edges, ctx.split.test_negatives, fd);
    }
    ev.embeddings = std::move(out.embeddings);
    ev.fused = std::move(out.fused);
    return ev;
}

tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = u(rng);
    return tensor({rows, cols}, std::move(v), true);
}

void check_compatible(const graph& g, const split_manifest& split, task_kind task) {
    if (split.task != task) throw contract_error("split task differs from the configured task");
    validate_split(g, split);
    if (task == task_kind::nc && g.num_classes < 2) throw contract_error("node classification needs at least 2 classes");
}

} // namespace

evaluation evaluate(const graph& g, const trained_model& m) {
    if (g.num_nodes != m.num_nodes || g.feature_dim != m.model.input_dim) {
        throw dimension_error("checkpoint expects " + std::to_string(m.num_nodes) + " nodes with " +
                              std::to_string(m.model.input_dim) + " features, graph has " +
                              std::to_string(g.num_nodes) + " and " + std::to_string(g.feature_dim));
    }
    if (m.config.task == task_kind::nc && g.num_classes != m.num_classes) {
        throw dimension_error("checkpoint expects " + std::to_string(m.num_classes) + " classes, graph has " +
                              std::to_string(g.num_classes));
    }
    check_compatible(g, m.split, m.config.task);
    const auto ctx = make_context(g, m.split);
    return evaluate_with(ctx, m.params, m.model, m.atlas, m.w_nc, m.config, m.metric);
}

// ---- training ----------------------------------------------------------------

train_result train(const graph& g, const split_manifest& split, const train_config& cfg, const train_options& options) {
    cfg.validate();
    check_compatible(g, split, cfg.task);
    const auto started = std::chrono::steady_clock::now();
    const auto ctx = make_context(g, split);
    const seed_tree seeds(cfg.seed);

    const model_config mcfg{.input_dim = g.feature_dim,
                            .hidden_dim = cfg.hidden_dim,
                            .num_layers = cfg.num_layers,
                            .dropout = cfg.dropout,
                            .manifolds = cfg.manifolds};
    auto init_rng = seeds.stream("init");
    model_params params = init_params(mcfg, init_rng);
    tensor w_nc;
    if (cfg.task == task_kind::nc) w_nc = glorot(static_cast<std::size_t>(g.num_classes), cfg.coreset_k, init_rng);
    const coreset_atlas atlas = build_atlas({.candidates = cfg.candidates, .k = cfg.coreset_k, .seed = cfg.seed},
                                            cfg.hidden_dim);

    auto dropout_rng = seeds.stream("dropout");
    auto negative_rng = seeds.stream("negatives");
    const fermi_dirac fd{cfg.fermi_r, cfg.fermi_t};
    const metric_kind metric = metric_for(cfg.task, g.num_classes);

    edge_set all_edges, held_out;
    if (cfg.task == task_kind::lp) {
        all_edges = edge_set(g.num_nodes, g.edges);
        held_out = edge_set(g.num_nodes, split.val_negatives);
        for (const auto& e : split.test_negatives) held_out.insert(e);
    }

    std::vector<tensor> trainable = params.tensors();
    if (w_nc.defined()) trainable.push_back(w_nc);
    ad::optimizer_state opt{.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay};

    train_result result;
    run_report& report = result.report;
    report.config = cfg;
    report.metric = metric;
    double best = -std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_value = 0.0;
        try {
            const auto out = run_pipeline(ctx, params, mcfg, atlas, cfg.dropout > 0.0 ? &dropout_rng : nullptr);
            tensor loss;
            if (cfg.task == task_kind::nc) {
                loss = nc_loss(nc_log_probabilities(out.fused, w_nc), g.labels, split.train_nodes);
            } else {
                const auto negatives =
                    sample_negatives(g.num_nodes, all_edges, split.train_edges.size(), negative_rng, &held_out);
                loss = lp_loss(lp_logits(out.fused, split.train_edges, fd), lp_logits(out.fused, negatives, fd));
            }
            loss_value = loss.item();
            if (!std::isfinite(loss_value)) throw divergence_error(epoch, "loss is " + std::to_string(loss_value));
            ad::backward(loss);
            for (auto& p : trainable) p.grad(); // parameters outside the active path get a zero gradient
            ad::adam_step(trainable, opt);
            ad::zero_grads(trainable);
        } catch (const numerical_error& e) {
            throw divergence_error(epoch, e.what());
        } catch (const domain_error& e) {
            throw divergence_error(epoch, e.what());
        }

        const auto ev = evaluate_with(ctx, params, mcfg, atlas, w_nc, cfg, metric);
        const epoch_record rec{epoch, loss_value, ev.val_metric};
        report.curve.push_back(rec);
        report.epochs_run = epoch;
        if (options.on_epoch) options.on_epoch(rec);

        if (ev.val_metric > best) {
            best = ev.val_metric;
            since_best = 0;
            report.best_val_metric = ev.val_metric;
            report.test_metric = ev.test_metric;
            report.best_epoch = epoch;
            auto& snap = result.best;
            snap.config = cfg;
            snap.model = mcfg;
            snap.params = params.clone();
            snap.w_nc = w_nc.defined() ? w_nc.detach() : tensor{};
            snap.epoch = epoch;
            snap.val_metric = ev.val_metric;
            snap.test_metric = ev.test_metric;
        } else if (++since_best >= cfg.patience) {
            report.early_stopped = true;
            break;
        }
    }

    auto& snap = result.best;
    snap.atlas = atlas;
    snap.split = split;
    snap.num_nodes = g.num_nodes;
    snap.num_classes = g.num_classes;
    snap.metric = metric;
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace fmgnn

#include "cli.hpp"

#include "fmgnn/diagnostics.hpp"
#include "fmgnn/errors.hpp"
#include "fmgnn/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <variant>

namespace fmgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct failure {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw failure{code, message}; }

// Runs `f`, turning library errors into a failure with the given exit code.
template <class F>
auto phase(int code, const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const failure&) {
        throw;
    } catch (const config_error& e) {
        fail(exit_config, what + ": " + e.what());
    } catch (const divergence_error& e) {
        fail(exit_divergence, what + ": " + e.what());
    } catch (const std::exception& e) {
        fail(code, what + ": " + e.what());
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Temp file plus rename, so readers never see a partial file.
void write_atomic(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// ---- configuration file ------------------------------------------------------

struct file_dataset {
    fs::path edges, features, labels;
};

struct setup {
    std::variant<file_dataset, synthetic_config> dataset;
    std::uint64_t synthetic_seed = 0;
    bool normalize_features = true;
    std::optional<nc_policy> policy; // default planetoid
    std::optional<fs::path> split_file;
    train_config train;
};

fs::path resolve(const fs::path& base, const json& v, const std::string& key) {
    if (!v.is_string()) throw config_error(key + ": expected a path string");
    const fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw config_error("unknown configuration key '" + where + "." + k + "'");
    }
}

synthetic_config synthetic_from_json(const json& j, std::uint64_t& seed) {
    reject_unknown(j, {"num_nodes", "num_classes", "feature_dim", "average_degree", "homophily", "feature_density",
                       "feature_noise", "seed"},
                   "dataset.synthetic");
    synthetic_config c;
    try {
        c.num_nodes = j.value("num_nodes", c.num_nodes);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.feature_dim = j.value("feature_dim", c.feature_dim);
        c.average_degree = j.value("average_degree", c.average_degree);
        c.homophily = j.value("homophily", c.homophily);
        c.feature_density = j.value("feature_density", c.feature_density);
        c.feature_noise = j.value("feature_noise", c.feature_noise);
        seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw config_error(std::string("dataset.synthetic: ") + e.what());
    }
    return c;
}

setup parse_setup(const fs::path& config_path) {
    std::string text;
    try {
        text = read_file(config_path);
    } catch (const std::exception& e) {
        throw config_error(e.what());
    }
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw config_error(config_path.string() + ": not a JSON object");
    const fs::path base = config_path.parent_path().empty() ? fs::path(".") : config_path.parent_path();

    setup s;
    json train_keys = json::object();
    bool have_dataset = false;
    for (const auto& [key, v] : j.items()) {
        if (key == "dataset") {
            have_dataset = true;
            if (v.contains("synthetic")) {
                reject_unknown(v, {"synthetic", "normalize_features"}, "dataset");
                s.dataset = synthetic_from_json(v.at("synthetic"), s.synthetic_seed);
            } else {
                reject_unknown(v, {"edges", "features", "labels", "normalize_features"}, "dataset");
                for (const char* k : {"edges", "features", "labels"})
                    if (!v.contains(k)) throw config_error(std::string("dataset.") + k + ": missing");
                s.dataset = file_dataset{resolve(base, v.at("edges"), "dataset.edges"),
                                         resolve(base, v.at("features"), "dataset.features"),
                                         resolve(base, v.at("labels"), "dataset.labels")};
            }
            if (v.contains("normalize_features")) {
                if (!v.at("normalize_features").is_boolean()) throw config_error("dataset.normalize_features: expected a boolean");
                s.normalize_features = v.at("normalize_features").get<bool>();
            }
        } else if (key == "split") {
            reject_unknown(v, {"policy", "per_class", "val", "test", "train", "file"}, "split");
            if (v.contains("file")) {
                s.split_file = resolve(base, v.at("file"), "split.file");
                continue;
            }
            const std::string policy = v.value("policy", std::string("planetoid"));
            try {
                if (policy == "planetoid") {
                    planetoid_policy p;
                    p.per_class = v.value("per_class", p.per_class);
                    p.val = v.value("val", p.val);
                    p.test = v.value("test", p.test);
                    s.policy = p;
                } else if (policy == "fractional") {
                    fractional_policy p;
                    p.p_train = v.value("train", 0.0);
                    p.p_val = v.value("val", 0.0);
                    s.policy = p;
                } else {
                    throw config_error("split.policy: expected 'planetoid' or 'fractional'");
                }
            } catch (const json::exception& e) {
                throw config_error(std::string("split: ") + e.what());
            }
        } else {
            train_keys[key] = v;
        }
    }
    if (!have_dataset) throw config_error("dataset: missing");
    s.train = train_config_from_json(train_keys);
    return s;
}

graph load_dataset(const setup& s) {
    graph g;
    if (const auto* f = std::get_if<file_dataset>(&s.dataset)) {
        g = load_graph(f->edges, f->features, f->labels);
    } else {
        g = make_synthetic_graph(std::get<synthetic_config>(s.dataset), s.synthetic_seed);
    }
    if (s.normalize_features) row_normalize_features(g);
    return g;
}

split_manifest make_split(const setup& s, const graph& g, task_kind task, std::uint64_t seed) {
    if (s.split_file) return split_from_json(read_file(*s.split_file));
    if (task == task_kind::lp) return make_lp_split(g, seed);
    return make_nc_split(g, s.policy.value_or(planetoid_policy{}), seed);
}

// ---- shared flags ------------------------------------------------------------

struct common_flags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string task;
    std::string manifolds;
};

void add_common(CLI::App* cmd, common_flags& f) {
    cmd->add_option("--config", f.config, "Configuration JSON file")->required();
    cmd->add_option("--set", f.sets, "Override a training key (key=value), repeatable");
    cmd->add_option("--seed", f.seed, "Root seed");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--task", f.task, "nc or lp")->check(CLI::IsMember({"nc", "lp"}));
    cmd->add_option("--manifolds", f.manifolds, "Active manifolds: E, H, S, EH, ES, HS or EHS");
}

setup load_setup(const common_flags& f) {
    return phase(exit_config, "config", [&] {
        setup s = parse_setup(f.config);
        for (const auto& a : f.sets) apply_override(s.train, a);
        if (f.seed) apply_override(s.train, "seed=" + std::to_string(*f.seed));
        if (!f.task.empty()) apply_override(s.train, "task=" + f.task);
        if (!f.manifolds.empty()) apply_override(s.train, "manifolds=" + f.manifolds);
        s.train.validate();
        return s;
    });
}

std::pair<graph, split_manifest> load_data(const setup& s) {
    return phase(exit_data, "data", [&] {
        graph g = load_dataset(s);
        split_manifest split = make_split(s, g, s.train.task, s.train.seed);
        if (split.task != s.train.task) throw split_error("split file task differs from the configured task");
        validate_split(g, split);
        return std::pair{std::move(g), std::move(split)};
    });
}

train_result run_training(const graph& g, const split_manifest& split, const train_config& cfg, int log_every,
                          std::ostream& err) {
    train_options opt;
    if (log_every > 0) {
        opt.on_epoch = [&err, log_every](const epoch_record& r) {
            if (r.epoch % log_every == 0)
                err << "epoch " << r.epoch << " loss " << r.train_loss << " val " << r.val_metric << '\n';
        };
    }
    return phase(exit_data, "train", [&] { return train(g, split, cfg, opt); });
}

// ---- commands ----------------------------------------------------------------

int cmd_train(const common_flags& f, int log_every, std::ostream& out, std::ostream& err) {
    const setup s = load_setup(f);
    const auto [g, split] = load_data(s);
    const auto r = run_training(g, split, s.train, log_every, err);
    const fs::path dir = f.out;
    phase(exit_data, "output", [&] {
        write_atomic(dir / "checkpoint.json", checkpoint_to_json(r.best) + "\n");
        write_atomic(dir / "timing.json", pretty({{"wall_clock_seconds", r.report.wall_clock_seconds}}));
        write_atomic(dir / "metrics.json", pretty(to_json(r.report)));
    });
    out << to_string(r.report.metric) << ' ' << shortest(r.report.test_metric) << " (best val "
        << shortest(r.report.best_val_metric) << " at epoch " << r.report.best_epoch << ")\n";
    return exit_ok;
}

int cmd_eval(const std::string& checkpoint, const common_flags& f, bool write, std::ostream& out) {
    const setup s = phase(exit_config, "config", [&] { return parse_setup(f.config); });
    const auto m = phase(exit_data, "checkpoint", [&] { return checkpoint_from_json(read_file(checkpoint)); });
    const graph g = phase(exit_data, "data", [&] { return load_dataset(s); });
    const auto ev = phase(exit_data, "eval", [&] { return evaluate(g, m); });
    const json j{{"metric_name", std::string(to_string(m.metric))},
                 {std::string(to_string(m.metric)), ev.test_metric},
                 {"test_metric", ev.test_metric},
                 {"val_metric", ev.val_metric},
                 {"checkpoint_test_metric", m.test_metric},
                 {"matches_checkpoint", ev.test_metric == m.test_metric},
                 {"epoch", m.epoch}};
    if (write) phase(exit_data, "output", [&] { write_atomic(fs::path(f.out) / "eval.json", pretty(j)); });
    out << pretty(j);
    return exit_ok;
}

int cmd_diagnose(const common_flags& f, std::vector<std::uint64_t> seeds, int jobs, std::ostream& out,
                 std::ostream& err) {
    const setup s = load_setup(f);
    const auto [g, split] = load_data(s);
    if (seeds.size() < 2) fail(exit_config, "diagnose: --seeds needs at least two seeds");
    err << "diagnose " << s.train.manifolds.name() << " over " << seeds.size() << " seeds\n";
    const auto r = phase(exit_data, "diagnose", [&] { return seed_sweep(g, split, s.train, seeds, jobs); });
    phase(exit_data, "output", [&] {
        write_atomic(fs::path(f.out) / "stability.json", pretty(to_json(r)));
        write_atomic(fs::path(f.out) / "stability_pairs.csv", centroid_pairs_csv(r));
    });
    out << "offset " << shortest(r.offset) << " scale " << shortest(r.scale) << " normalized_offset "
        << shortest(r.normalized_offset) << '\n';
    if (!r.complete) {
        for (const auto& msg : r.failures) err << msg << '\n';
        return exit_divergence;
    }
    return exit_ok;
}

int cmd_ablate(const common_flags& f, std::vector<std::uint64_t> seeds, std::ostream& out, std::ostream& err) {
    const setup s = load_setup(f);
    const auto [g, split] = load_data(s);
    if (seeds.empty()) seeds.push_back(s.train.seed);
    std::string csv = "manifolds,metric,value,seed\n";
    for (const auto& subset : manifold_set::all_subsets()) {
        for (auto seed : seeds) {
            auto cfg = s.train;
            cfg.manifolds = subset;
            cfg.seed = seed;
            const auto r = run_training(g, split, cfg, 0, err);
            const std::string row = subset.name() + "," + std::string(to_string(r.report.metric)) + "," +
                                    shortest(r.report.test_metric) + "," + std::to_string(seed);
            err << row << '\n';
            csv += row + "\n";
        }
    }
    phase(exit_data, "output", [&] { write_atomic(fs::path(f.out) / "ablation.csv", csv); });
    out << csv;
    return exit_ok;
}

int cmd_coreset_sweep(const common_flags& f, const std::vector<std::size_t>& sizes, std::vector<std::uint64_t> seeds,
                      std::ostream& out, std::ostream& err) {
    const setup s = load_setup(f);
    const auto [g, split] = load_data(s);
    if (seeds.empty()) seeds.push_back(s.train.seed);
    if (sizes.empty()) fail(exit_config, "coreset-sweep: --sizes is empty");
    std::string csv = "coreset_k,metric,value,seed\n";
    for (auto k : sizes) {
        for (auto seed : seeds) {
            auto cfg = s.train;
            cfg.coreset_k = k;
            cfg.seed = seed;
            phase(exit_config, "config", [&] { cfg.validate(); });
            const auto r = run_training(g, split, cfg, 0, err);
            const std::string row = std::to_string(k) + "," + std::string(to_string(r.report.metric)) + "," +
                                    shortest(r.report.test_metric) + "," + std::to_string(seed);
            err << row << '\n';
            csv += row + "\n";
        }
    }
    phase(exit_data, "output", [&] { write_atomic(fs::path(f.out) / "coreset_sweep.csv", csv); });
    out << csv;
    return exit_ok;
}

struct preprocess_flags {
    std::string config;
    std::string out = ".";
    bool synthetic = false;
    synthetic_config syn;
    std::uint64_t seed = 0;
    std::string task = "nc";
};

int cmd_preprocess(const preprocess_flags& p, std::ostream& out) {
    graph g;
    split_manifest split;
    const fs::path dir = p.out;
    if (p.synthetic) {
        g = phase(exit_config, "synthetic", [&] { return make_synthetic_graph(p.syn, p.seed); });
        split = phase(exit_data, "split", [&] {
            return parse_task(p.task) == task_kind::lp ? make_lp_split(g, p.seed)
                                                       : make_nc_split(g, fractional_policy{0.6, 0.2}, p.seed);
        });
    } else {
        if (p.config.empty()) fail(exit_config, "preprocess: give --config or --synthetic");
        const setup s = phase(exit_config, "config", [&] { return parse_setup(p.config); });
        std::tie(g, split) = load_data(s);
    }
    phase(exit_data, "output", [&] {
        fs::create_directories(dir);
        save_graph(g, dir / "edges.txt", dir / "features.txt", dir / "labels.txt");
        write_atomic(dir / "split.json", split_to_json(split) + "\n");
    });
    out << g.num_nodes << " nodes, " << g.edges.size() << " edges, " << g.feature_dim << " features, "
        << g.num_classes << " classes\n";
    return exit_ok;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fused manifold graph neural network"};
    app.require_subcommand(1);

    common_flags train_f, eval_f, diag_f, ablate_f, sweep_f;
    int log_every = 0, jobs = 1;
    std::string checkpoint;
    bool eval_write = false;
    std::vector<std::uint64_t> diag_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, ablate_seeds, sweep_seeds;
    std::vector<std::size_t> sizes{10, 50, 100};
    preprocess_flags pre;

    auto* train_cmd = app.add_subcommand("train", "Train a model; writes metrics.json and checkpoint.json");
    add_common(train_cmd, train_f);
    train_cmd->add_option("--log-every", log_every, "Print progress every N epochs");

    auto* eval_cmd = app.add_subcommand("eval", "Re-evaluate a checkpoint on the dataset of a configuration");
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
    eval_cmd->add_option("--config", eval_f.config, "Configuration JSON naming the dataset")->required();
    eval_cmd->add_option("--out", eval_f.out, "Output directory for eval.json")->each([&](const std::string&) {
        eval_write = true;
    });

    auto* diag_cmd = app.add_subcommand("diagnose", "Seed sweep with centroid offset and scale");
    add_common(diag_cmd, diag_f);
    diag_cmd->add_option("--seeds", diag_seeds, "Comma separated seeds")->delimiter(',');
    diag_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    auto* ablate_cmd = app.add_subcommand("ablate", "Train every manifold subset; writes ablation.csv");
    add_common(ablate_cmd, ablate_f);
    ablate_cmd->add_option("--seeds", ablate_seeds, "Comma separated seeds (default: the configured seed)")
        ->delimiter(',');

    auto* sweep_cmd = app.add_subcommand("coreset-sweep", "Train with several coreset sizes; writes coreset_sweep.csv");
    add_common(sweep_cmd, sweep_f);
    sweep_cmd->add_option("--sizes", sizes, "Comma separated coreset sizes")->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep_seeds, "Comma separated seeds (default: the configured seed)")
        ->delimiter(',');

    auto* pre_cmd = app.add_subcommand("preprocess", "Write a dataset and its split in the text formats");
    pre_cmd->add_option("--config", pre.config, "Configuration JSON");
    pre_cmd->add_option("--out", pre.out, "Output directory");
    pre_cmd->add_flag("--synthetic", pre.synthetic, "Generate a planted-partition graph instead");
    pre_cmd->add_option("--nodes", pre.syn.num_nodes, "Synthetic node count");
    pre_cmd->add_option("--classes", pre.syn.num_classes, "Synthetic class count");
    pre_cmd->add_option("--features", pre.syn.feature_dim, "Synthetic feature dimension");
    pre_cmd->add_option("--degree", pre.syn.average_degree, "Synthetic average degree");
    pre_cmd->add_option("--homophily", pre.syn.homophily, "Synthetic fraction of intra-class edges");
    pre_cmd->add_option("--seed", pre.seed, "Seed for generation and split");
    pre_cmd->add_option("--task", pre.task, "Split for nc or lp")->check(CLI::IsMember({"nc", "lp"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*train_cmd) return cmd_train(train_f, log_every, out, err);
        if (*eval_cmd) return cmd_eval(checkpoint, eval_f, eval_write, out);
        if (*diag_cmd) return cmd_diagnose(diag_f, diag_seeds, jobs, out, err);
        if (*ablate_cmd) return cmd_ablate(ablate_f, ablate_seeds, out, err);
        if (*sweep_cmd) return cmd_coreset_sweep(sweep_f, sizes, sweep_seeds, out, err);
        if (*pre_cmd) return cmd_preprocess(pre, out);
    } catch (const failure& f) {
        err << "error: " << f.message << '\n';
        return f.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_internal;
}

} // namespace fmgnn::cli

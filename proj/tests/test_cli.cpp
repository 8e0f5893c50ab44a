#include "cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct result {
    int code;
    std::string out, err;
};

result run(std::vector<std::string> args) {
    args.insert(args.begin(), "fmgnn");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = fmgnn::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct workspace {
    fs::path dir;
    workspace() {
        dir = fs::temp_directory_path() / ("fmgnn_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~workspace() { fs::remove_all(dir); }

    fs::path config(const json& j, const std::string& name = "cfg.json") const {
        spit(dir / name, j.dump());
        return dir / name;
    }
};

json small(json extra = json::object()) {
    json j{{"dataset", {{"synthetic", {{"num_nodes", 90}, {"num_classes", 3}, {"feature_dim", 16}, {"seed", 4}}}}},
           {"split", {{"policy", "fractional"}, {"train", 0.5}, {"val", 0.2}}},
           {"epochs", 12},
           {"patience", 12},
           {"hidden_dim", 6},
           {"coreset_k", 5},
           {"candidates", 30}};
    j.update(extra);
    return j;
}

} // namespace

TEST_CASE("train, eval and idempotence") {
    workspace ws;
    const auto cfg = ws.config(small()).string();
    const auto a = run({"train", "--config", cfg, "--out", (ws.dir / "a").string()});
    REQUIRE(a.code == 0);
    const auto b = run({"train", "--config", cfg, "--out", (ws.dir / "b").string()});
    REQUIRE(b.code == 0);
    CHECK(slurp(ws.dir / "a" / "metrics.json") == slurp(ws.dir / "b" / "metrics.json"));
    CHECK(slurp(ws.dir / "a" / "checkpoint.json") == slurp(ws.dir / "b" / "checkpoint.json"));
    CHECK_FALSE(fs::exists(ws.dir / "a" / "metrics.json.tmp"));

    const auto metrics = json::parse(slurp(ws.dir / "a" / "metrics.json"));
    CHECK(metrics.contains("accuracy"));
    CHECK(metrics.contains("epoch_curve"));
    CHECK_FALSE(metrics.contains("wall_clock_seconds"));
    CHECK(json::parse(slurp(ws.dir / "a" / "timing.json")).contains("wall_clock_seconds"));

    const auto ev = run({"eval", "--checkpoint", (ws.dir / "a" / "checkpoint.json").string(), "--config", cfg});
    REQUIRE(ev.code == 0);
    const auto e = json::parse(ev.out);
    CHECK(e["test_metric"].get<double>() == metrics["test_metric"].get<double>());
    CHECK(e["matches_checkpoint"].get<bool>());

    const auto seeded = run({"train", "--config", cfg, "--seed", "7", "--out", (ws.dir / "c").string()});
    REQUIRE(seeded.code == 0);
    CHECK(json::parse(slurp(ws.dir / "c" / "metrics.json"))["seed"] == 7);

    const auto lp = run({"train", "--config", cfg, "--task", "lp", "--manifolds", "HS", "--out", (ws.dir / "d").string()});
    REQUIRE(lp.code == 0);
    const auto lm = json::parse(slurp(ws.dir / "d" / "metrics.json"));
    CHECK(lm.contains("roc_auc"));
    CHECK(lm["config"]["manifolds"] == "HS");
}

TEST_CASE("exit codes") {
    workspace ws;
    CHECK(run({"train", "--config", (ws.dir / "nope.json").string()}).code == 1);
    CHECK(run({"train", "--config", ws.config(small({{"colour", "red"}})).string()}).code == 1);
    CHECK(run({"train", "--config", ws.config(small()).string(), "--set", "epochs=zero"}).code == 1);
    CHECK(run({"train", "--config", ws.config(small()).string(), "--manifolds", "Q"}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"--help"}).code == 0);

    json files = small();
    files["dataset"] = {{"edges", "missing_edges.txt"}, {"features", "f.txt"}, {"labels", "l.txt"}};
    spit(ws.dir / "f.txt", "0 1 0\n1 0 1\n");
    spit(ws.dir / "l.txt", "0 0\n1 1\n");
    const auto missing = run({"train", "--config", ws.config(files).string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find((ws.dir / "missing_edges.txt").string()) != std::string::npos);

    const auto diverge = run({"train", "--config", ws.config(small({{"learning_rate", 1e12}})).string(), "--out",
                              (ws.dir / "x").string()});
    CHECK(diverge.code == 3);
    CHECK(diverge.err.find("epoch") != std::string::npos);

    REQUIRE(run({"train", "--config", ws.config(small()).string(), "--out", (ws.dir / "t").string()}).code == 0);
    const auto ckpt = slurp(ws.dir / "t" / "checkpoint.json");
    spit(ws.dir / "cut.json", ckpt.substr(0, ckpt.size() / 3));
    CHECK(run({"eval", "--checkpoint", (ws.dir / "cut.json").string(), "--config", ws.config(small()).string()}).code ==
          2);
    json other = small();
    other["dataset"]["synthetic"]["feature_dim"] = 20;
    CHECK(run({"eval", "--checkpoint", (ws.dir / "t" / "checkpoint.json").string(), "--config",
               ws.config(other, "other.json").string()})
              .code == 2);
}

TEST_CASE("ablate, diagnose and the coreset sweep") {
    workspace ws;
    const auto cfg = ws.config(small({{"epochs", 5}})).string();
    const auto ab = run({"ablate", "--config", cfg, "--out", ws.dir.string()});
    REQUIRE(ab.code == 0);
    const auto csv = slurp(ws.dir / "ablation.csv");
    CHECK(csv.rfind("manifolds,metric,value,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
    CHECK(csv.find("\nEHS,accuracy,") != std::string::npos);

    const auto twins = run({"diagnose", "--config", cfg, "--seeds", "1,1", "--out", (ws.dir / "d1").string()});
    REQUIRE(twins.code == 0);
    CHECK(json::parse(slurp(ws.dir / "d1" / "stability.json"))["offset"] == 0.0);

    REQUIRE(run({"diagnose", "--config", cfg, "--seeds", "1,2,3", "--jobs", "2", "--out", (ws.dir / "d3").string()})
                .code == 0);
    const auto s = json::parse(slurp(ws.dir / "d3" / "stability.json"));
    for (const char* key : {"model_tag", "T", "scale", "offset", "normalized_offset", "centroids", "metrics"})
        CHECK(s.contains(key));
    CHECK(s["T"] == 3);
    CHECK(s["normalized_offset"].get<double>() == s["offset"].get<double>() / s["scale"].get<double>());
    CHECK(run({"diagnose", "--config", cfg, "--seeds", "1"}).code == 1);

    REQUIRE(run({"coreset-sweep", "--config", cfg, "--sizes", "3,5", "--out", ws.dir.string()}).code == 0);
    const auto sweep = slurp(ws.dir / "coreset_sweep.csv");
    CHECK(sweep.rfind("coreset_k,metric,value,seed\n", 0) == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
}

TEST_CASE("preprocess") {
    workspace ws;
    const auto data = ws.dir / "data";
    REQUIRE(run({"preprocess", "--synthetic", "--nodes", "50", "--classes", "2", "--features", "10", "--seed", "3",
                 "--out", data.string()})
                .code == 0);
    for (const char* f : {"edges.txt", "features.txt", "labels.txt", "split.json"}) CHECK(fs::exists(data / f));

    json cfg = small({{"epochs", 3}});
    cfg["dataset"] = {{"edges", "data/edges.txt"}, {"features", "data/features.txt"}, {"labels", "data/labels.txt"}};
    cfg["split"] = {{"file", "data/split.json"}};
    const auto r = run({"train", "--config", ws.config(cfg).string(), "--out", (ws.dir / "r").string()});
    CHECK(r.code == 0);
    CHECK(json::parse(slurp(ws.dir / "r" / "metrics.json"))["metric_name"] == "f1_binary");

    const auto again = ws.dir / "again";
    REQUIRE(run({"preprocess", "--config", ws.config(cfg).string(), "--out", again.string()}).code == 0);
    CHECK(slurp(again / "edges.txt") == slurp(data / "edges.txt"));
}

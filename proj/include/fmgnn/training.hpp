#pragma once

// Full-graph training for node classification and link prediction, early
// stopping on the validation metric, checkpoints and run reports.

#include "fmgnn/coreset.hpp"
#include "fmgnn/graph.hpp"
#include "fmgnn/heads.hpp"
#include "fmgnn/metrics.hpp"
#include "fmgnn/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fmgnn {

struct train_config {
    task_kind task = task_kind::nc;
    int epochs = 500;
    int patience = 100;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    double dropout = 0.5;
    std::size_t hidden_dim = 100;
    std::size_t num_layers = 2;
    std::size_t coreset_k = 100;
    std::size_t candidates = 1000;
    std::uint64_t seed = 0;
    double fermi_r = 2.0;
    double fermi_t = 1.0;
    manifold_set manifolds;

    /// Throws config_error naming the first bad field.
    void validate() const;
};

nlohmann::json to_json(const train_config& c);
/// Applies the keys of `j` on top of `base`. Unknown keys and wrongly typed
/// values throw config_error.
train_config train_config_from_json(const nlohmann::json& j, train_config base = {});
/// Applies one "key=value" override.
void apply_override(train_config& c, const std::string& assignment);

struct epoch_record {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct run_report {
    metric_kind metric = metric_kind::accuracy;
    double best_val_metric = 0.0;
    double test_metric = 0.0; // at the best validation epoch
    int best_epoch = 0;
    int epochs_run = 0;
    bool early_stopped = false;
    std::vector<epoch_record> curve;
    double wall_clock_seconds = 0.0;
    train_config config;
};

/// Wall-clock time is left out unless asked for, so that reports of
/// identical runs are byte-identical.
nlohmann::json to_json(const run_report& r, bool with_timing = false);

/// Everything needed to re-evaluate a run without retraining.
struct trained_model {
    train_config config;
    model_config model;
    model_params params;
    ad::tensor w_nc; // tau x k; undefined for link prediction
    coreset_atlas atlas;
    split_manifest split;
    std::size_t num_nodes = 0;
    int num_classes = 0;
    int epoch = 0;
    metric_kind metric = metric_kind::accuracy;
    double val_metric = 0.0;
    double test_metric = 0.0;
};

std::string checkpoint_to_json(const trained_model& m);
/// Throws contract_error on malformed content.
trained_model checkpoint_from_json(const std::string& text);

metric_kind metric_for(task_kind task, int num_classes);

struct evaluation {
    double val_metric = 0.0;
    double test_metric = 0.0;
    manifold_state embeddings; // final per-manifold node states
    ad::tensor fused;          // n x k
    std::vector<int> predictions; // node classification only
};

/// Deterministic, dropout-free evaluation of a stored model. Throws
/// dimension_error when the graph does not match the model.
evaluation evaluate(const graph& g, const trained_model& m);

struct train_options {
    std::function<void(const epoch_record&)> on_epoch;
};

struct train_result {
    run_report report;
    trained_model best;
};

/// Adam on the task loss, evaluation after every epoch, stop after
/// `patience` epochs without a strict improvement of the validation metric.
/// Throws divergence_error on a non-finite loss or a numerical breakdown.
train_result train(const graph& g, const split_manifest& split, const train_config& cfg,
                   const train_options& options = {});

} // namespace fmgnn

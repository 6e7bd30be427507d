#pragma once

// MSE training with validation-based snapshot selection, Adam, regression
// metrics, the mean-predictor baseline, and multi-run/multi-year experiment
// orchestration with Table-style CSV/markdown reports.

#include <cstdint>
#include <string>
#include <vector>

#include "ycvt/data.hpp"
#include "ycvt/model.hpp"

namespace ycvt::train {

// ------------------------------------------------------------- configuration

struct TrainConfig {
  double learning_rate = 0.00025;
  int64_t epochs = 150;
  int64_t batch_size = 32;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int64_t runs = 4;

  void validate() const;
};

/// Epoch presets per model: 150 (cvt13), 200 (cvt21), 250 (cvtw24), 30 (tiny).
TrainConfig train_preset(const std::string& model_preset);

// ------------------------------------------------------------------- metrics

struct Metrics {
  double mse = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

/// MSE/RMSE/R^2 of predictions against targets; R^2 is 1 - SS_res/SS_tot with
/// SS_tot about the target mean. Degenerate targets (SS_tot == 0) error.
Metrics compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets);

// ---------------------------------------------------------------------- adam

struct AdamState {
  int64_t step = 0;
  std::vector<NdArray> m, v;  // parallel to the store's entries
};

AdamState init_adam(const model::ParamStore& params);

/// One Adam update from the gradients currently on the store's parameters.
/// Parameters without a gradient are treated as zero-gradient.
void adam_step(model::ParamStore& params, AdamState& state, const TrainConfig& cfg);

// ------------------------------------------------------------------ training

struct EpochStats {
  double train_mse = 0.0;  // traversal-weighted minibatch mean, standardized scale
  double val_mse = 0.0;    // full validation MSE after the epoch, standardized scale
};

struct TrainResult {
  model::ParamStore best_params;  // snapshot at the validation minimum
  int64_t best_epoch = 0;         // 1-based
  double best_val_mse = 0.0;
  double initial_val_mse = 0.0;  // before any update
  std::vector<EpochStats> history;
  double target_mean = 0.0;  // standardization constants from the train split
  double target_std = 1.0;
};

/// Per epoch: seeded shuffle, minibatch MSE steps, full-validation MSE;
/// retains the snapshot with the minimum validation MSE (first epoch wins
/// ties). Targets are standardized by train-split statistics; the affine map
/// leaves the selection rule unchanged. Aborts on non-finite loss, naming
/// epoch and batch.
TrainResult train(const model::ModelConfig& cfg, const TrainConfig& tc,
                  const data::Dataset& train_ds, const data::Dataset& val_ds);

/// Validation-scale MSE of the given parameters, the exact path train() uses
/// for model selection.
double validation_mse(const model::ModelConfig& cfg, const model::ParamStore& params,
                      const data::Dataset& ds, double target_mean, double target_std,
                      int64_t batch_size = 32);

// ---------------------------------------------------------------- evaluation

/// Batched no-graph forward over the dataset; predictions are mapped back to
/// bushels per acre before the metrics.
Metrics evaluate(const model::TrainedModel& m, const data::Dataset& ds);

/// Predicts the train-split mean yield for every test sample.
Metrics baseline_mean(const data::Dataset& train_ds, const data::Dataset& test_ds);

// ---------------------------------------------------------------- experiment

struct ExperimentCell {
  int32_t year = 0;
  int64_t run = 0;  // 1-based
  Metrics metrics;
};

struct YearRow {
  int32_t year = 0;
  Metrics mean;  // componentwise over runs
};

struct ExperimentReport {
  std::vector<ExperimentCell> cells;
  std::vector<YearRow> per_year;
  Metrics grand;  // componentwise mean of the per-year rows
};

struct ExperimentOptions {
  double val_fraction = 0.10;
  std::string checkpoint_dir;  // empty: no checkpoints written
};

/// For each (test year, run): year split with a run-derived seed, train,
/// evaluate on the held-out year. Checkpoints carry float32 payloads, so the
/// reported metrics are computed on float32-rounded parameters; re-evaluating
/// a written checkpoint reproduces its report cell exactly.
ExperimentReport run_experiment(const model::ModelConfig& cfg, const TrainConfig& tc,
                                const data::Dataset& ds, const std::vector<int32_t>& test_years,
                                const ExperimentOptions& opts = {});

/// Year-mean rows plus the AVG row; %.17g cells round-trip exactly.
std::string report_csv(const ExperimentReport& report);
/// Per-(year, run) detail rows.
std::string cells_csv(const ExperimentReport& report);
std::string report_markdown(const ExperimentReport& report);

}  // namespace ycvt::train

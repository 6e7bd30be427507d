#include "ycvt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ycvt/kernels.hpp"
#include "ycvt/rng.hpp"

namespace ycvt::train {

// ------------------------------------------------------------- configuration

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValueError(cat("learning_rate must be > 0, got ", learning_rate));
  if (epochs < 1) throw ValueError(cat("epochs must be >= 1, got ", epochs));
  if (batch_size < 1) throw ValueError(cat("batch_size must be >= 1, got ", batch_size));
  if (runs < 1) throw ValueError(cat("runs must be >= 1, got ", runs));
}

TrainConfig train_preset(const std::string& model_preset) {
  TrainConfig tc;
  if (model_preset == "cvt13")
    tc.epochs = 150;
  else if (model_preset == "cvt21")
    tc.epochs = 200;
  else if (model_preset == "cvtw24")
    tc.epochs = 250;
  else if (model_preset == "tiny")
    tc.epochs = 30;
  else
    throw ValueError(cat("unknown model preset '", model_preset, "'"));
  return tc;
}

// ------------------------------------------------------------------- metrics

Metrics compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size())
    throw ShapeError(cat("metrics: ", preds.size(), " predictions vs ", targets.size(), " targets"));
  if (preds.empty()) throw ValueError("metrics: empty prediction set");
  const double n = static_cast<double>(preds.size());
  double t_mean = 0.0;
  for (double t : targets) t_mean += t;
  t_mean /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double r = preds[i] - targets[i];
    ss_res += r * r;
    const double d = targets[i] - t_mean;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0)
    throw ValueError("metrics: degenerate targets (zero variance), R^2 undefined");
  Metrics m;
  m.mse = ss_res / n;
  m.rmse = std::sqrt(m.mse);
  m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

// ---------------------------------------------------------------------- adam

AdamState init_adam(const model::ParamStore& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& [name, t] : params.entries()) {
    st.m.emplace_back(t.shape());
    st.v.emplace_back(t.shape());
  }
  return st;
}

void adam_step(model::ParamStore& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size())
    throw ValueError("adam state does not match the parameter store");
  state.step++;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto& kern = kernels::active();
  std::vector<double> zero;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params.entries()[i].second;
    const size_t n = static_cast<size_t>(t.numel());
    const double* gp;
    if (t.has_grad()) {
      gp = t.grad().ptr();
    } else {
      // Zero gradient: moments decay and the update is exactly zero.
      zero.assign(n, 0.0);
      gp = zero.data();
    }
    kern.adam_update(t.mutable_value().ptr(), gp, state.m[i].ptr(), state.v[i].ptr(), n,
                     cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, bc1, bc2,
                     cfg.weight_decay);
  }
}

// ------------------------------------------------------------------ training

namespace {

struct Scaler {
  double mean = 0.0, stddev = 1.0;
};

Scaler target_scaler(const data::Dataset& ds) {
  Scaler s;
  const double n = static_cast<double>(ds.samples.size());
  for (const auto& smp : ds.samples) s.mean += smp.yield_bu_ac;
  s.mean /= n;
  double var = 0.0;
  for (const auto& smp : ds.samples) {
    const double d = smp.yield_bu_ac - s.mean;
    var += d * d;
  }
  var /= n;
  s.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

model::ParamStore clone_params(const model::ParamStore& src) {
  model::ParamStore out;
  for (const auto& [name, t] : src.entries())
    out.add(name, Tensor(t.value(), /*requires_grad=*/true));
  return out;
}

}  // namespace

double validation_mse(const model::ModelConfig& cfg, const model::ParamStore& params,
                      const data::Dataset& ds, double target_mean, double target_std,
                      int64_t batch_size) {
  const model::PlainParamMap<double> pm = model::plain_view(params);
  const size_t n = ds.samples.size();
  double acc = 0.0;
  for (size_t at = 0; at < n; at += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(n, at + static_cast<size_t>(batch_size));
    std::vector<size_t> idx;
    idx.reserve(stop - at);
    for (size_t i = at; i < stop; ++i) idx.push_back(i);
    NdArray x = data::stack_batch(ds, idx);
    NdArray pred = model::forward_plain<double>(x, cfg, pm);
    for (size_t i = 0; i < idx.size(); ++i) {
      const double target = (ds.samples[idx[i]].yield_bu_ac - target_mean) / target_std;
      const double r = pred.data[i] - target;
      acc += r * r;
    }
  }
  return acc / static_cast<double>(n);
}

TrainResult train(const model::ModelConfig& cfg, const TrainConfig& tc,
                  const data::Dataset& train_ds, const data::Dataset& val_ds) {
  cfg.validate();
  tc.validate();
  if (train_ds.samples.empty() || val_ds.samples.empty())
    throw ValueError("train: empty train or validation dataset");

  const Scaler scaler = target_scaler(train_ds);
  model::ParamStore params = model::init_params(cfg, tc.seed);
  AdamState adam = init_adam(params);

  TrainResult res;
  res.target_mean = scaler.mean;
  res.target_std = scaler.stddev;
  res.initial_val_mse =
      validation_mse(cfg, params, val_ds, scaler.mean, scaler.stddev, tc.batch_size);
  res.best_val_mse = std::numeric_limits<double>::infinity();

  const size_t n_train = train_ds.samples.size();
  std::vector<double> std_targets(n_train);
  for (size_t i = 0; i < n_train; ++i)
    std_targets[i] = (train_ds.samples[i].yield_bu_ac - scaler.mean) / scaler.stddev;

  for (int64_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::vector<size_t> order(n_train);
    for (size_t i = 0; i < n_train; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(tc.seed, {0x5F00D, static_cast<uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int64_t batch_index = 0;
    for (size_t at = 0; at < n_train; at += static_cast<size_t>(tc.batch_size), ++batch_index) {
      const size_t stop = std::min(n_train, at + static_cast<size_t>(tc.batch_size));
      std::vector<size_t> idx(order.begin() + static_cast<long>(at),
                              order.begin() + static_cast<long>(stop));
      Tensor x(data::stack_batch(train_ds, idx));
      NdArray t({static_cast<int64_t>(idx.size()), 1});
      for (size_t i = 0; i < idx.size(); ++i) t.data[i] = std_targets[idx[i]];
      Tensor target(std::move(t));

      Tensor pred = model::forward(x, cfg, params);
      Tensor loss = mse_loss(pred, target);
      const double loss_v = loss.item();
      if (!std::isfinite(loss_v))
        throw ValueError(cat("training aborted: non-finite loss ", loss_v, " at epoch ",
                             epoch, " batch ", batch_index));
      epoch_loss += loss_v * static_cast<double>(idx.size());

      for (auto& [name, p] : params.entries()) p.zero_grad();
      autograd::backward(loss);
      adam_step(params, adam, tc);
    }

    EpochStats stats;
    stats.train_mse = epoch_loss / static_cast<double>(n_train);
    stats.val_mse =
        validation_mse(cfg, params, val_ds, scaler.mean, scaler.stddev, tc.batch_size);
    res.history.push_back(stats);

    if (stats.val_mse < res.best_val_mse) {
      res.best_val_mse = stats.val_mse;
      res.best_epoch = epoch;
      res.best_params = clone_params(params);
    }
  }
  return res;
}

// ---------------------------------------------------------------- evaluation

Metrics evaluate(const model::TrainedModel& m, const data::Dataset& ds) {
  if (ds.samples.empty()) throw ValueError("evaluate: empty dataset");
  if (ds.bands != m.cfg.input_channels || ds.bins != m.cfg.input_height ||
      ds.intervals != m.cfg.input_width)
    throw ShapeError(cat("evaluate: dataset grids are [", ds.bands, ",", ds.bins, ",",
                         ds.intervals, "] but the model expects [", m.cfg.input_channels,
                         ",", m.cfg.input_height, ",", m.cfg.input_width, "]"));
  const model::PlainParamMap<double> pm = model::plain_view(m.params);
  const size_t n = ds.samples.size();
  std::vector<double> preds, targets;
  preds.reserve(n);
  targets.reserve(n);
  constexpr size_t kBatch = 32;
  for (size_t at = 0; at < n; at += kBatch) {
    const size_t stop = std::min(n, at + kBatch);
    std::vector<size_t> idx;
    idx.reserve(stop - at);
    for (size_t i = at; i < stop; ++i) idx.push_back(i);
    NdArray x = data::stack_batch(ds, idx);
    NdArray pred = model::forward_plain<double>(x, m.cfg, pm);
    for (size_t i = 0; i < idx.size(); ++i) {
      preds.push_back(pred.data[i] * m.target_std + m.target_mean);
      targets.push_back(ds.samples[idx[i]].yield_bu_ac);
    }
  }
  return compute_metrics(preds, targets);
}

Metrics baseline_mean(const data::Dataset& train_ds, const data::Dataset& test_ds) {
  if (train_ds.samples.empty() || test_ds.samples.empty())
    throw ValueError("baseline_mean: empty dataset");
  double mean = 0.0;
  for (const auto& s : train_ds.samples) mean += s.yield_bu_ac;
  mean /= static_cast<double>(train_ds.samples.size());
  std::vector<double> preds(test_ds.samples.size(), mean), targets;
  targets.reserve(test_ds.samples.size());
  for (const auto& s : test_ds.samples) targets.push_back(s.yield_bu_ac);
  return compute_metrics(preds, targets);
}

// ---------------------------------------------------------------- experiment

ExperimentReport run_experiment(const model::ModelConfig& cfg, const TrainConfig& tc,
                                const data::Dataset& ds, const std::vector<int32_t>& test_years,
                                const ExperimentOptions& opts) {
  if (test_years.empty()) throw ValueError("run_experiment: no test years");
  ExperimentReport report;
  for (int32_t year : test_years) {
    Metrics year_sum;
    for (int64_t run = 1; run <= tc.runs; ++run) {
      const uint64_t run_seed =
          derive_seed(tc.seed, {static_cast<uint64_t>(year), static_cast<uint64_t>(run)});
      data::SplitSpec spec;
      spec.test_year = year;
      spec.val_fraction = opts.val_fraction;
      spec.seed = run_seed;
      data::Split split = data::split_by_year(ds, spec);

      TrainConfig run_tc = tc;
      run_tc.seed = derive_seed(run_seed, {0x1217});
      TrainResult tr = train(cfg, run_tc, split.train, split.val);

      // Metrics come from float32-rounded parameters: exactly the payload a
      // checkpoint carries, so cmd_eval on the file reproduces the cell.
      model::TrainedModel tm;
      tm.cfg = cfg;
      tm.params = std::move(tr.best_params);
      tm.target_mean = tr.target_mean;
      tm.target_std = tr.target_std;
      model::round_params_f32(tm.params);
      if (!opts.checkpoint_dir.empty())
        model::save_checkpoint(cat(opts.checkpoint_dir, "/ckpt_y", year, "_r", run, ".yldp"), tm);

      ExperimentCell cell;
      cell.year = year;
      cell.run = run;
      cell.metrics = evaluate(tm, split.test);
      year_sum.mse += cell.metrics.mse;
      year_sum.rmse += cell.metrics.rmse;
      year_sum.r2 += cell.metrics.r2;
      report.cells.push_back(cell);
    }
    YearRow row;
    row.year = year;
    const double r = static_cast<double>(tc.runs);
    row.mean = {year_sum.mse / r, year_sum.rmse / r, year_sum.r2 / r};
    report.per_year.push_back(row);
  }
  const double ny = static_cast<double>(report.per_year.size());
  for (const YearRow& row : report.per_year) {
    report.grand.mse += row.mean.mse / ny;
    report.grand.rmse += row.mean.rmse / ny;
    report.grand.r2 += row.mean.r2 / ny;
  }
  return report;
}

namespace {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(const ExperimentReport& report) {
  std::string out = "year,mse,rmse,r2\n";
  for (const YearRow& row : report.per_year)
    out += cat(row.year, ",", fmt_g17(row.mean.mse), ",", fmt_g17(row.mean.rmse), ",",
               fmt_g17(row.mean.r2), "\n");
  out += cat("AVG,", fmt_g17(report.grand.mse), ",", fmt_g17(report.grand.rmse), ",",
             fmt_g17(report.grand.r2), "\n");
  return out;
}

std::string cells_csv(const ExperimentReport& report) {
  std::string out = "year,run,mse,rmse,r2\n";
  for (const ExperimentCell& c : report.cells)
    out += cat(c.year, ",", c.run, ",", fmt_g17(c.metrics.mse), ",", fmt_g17(c.metrics.rmse),
               ",", fmt_g17(c.metrics.r2), "\n");
  return out;
}

std::string report_markdown(const ExperimentReport& report) {
  char buf[128];
  std::string out = "| Year | RMSE | R2 |\n|------|------|----|\n";
  for (const YearRow& row : report.per_year) {
    std::snprintf(buf, sizeof(buf), "| %d | %.2f | %.3f |\n", row.year, row.mean.rmse,
                  row.mean.r2);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "| **AVG** | %.2f | %.3f |\n", report.grand.rmse,
                report.grand.r2);
  out += buf;
  return out;
}

}  // namespace ycvt::train

#pragma once

// Dataset model and formats: per-district-year histogram samples, the YLDH
// binary container (also reused for named-parameter checkpoints), column
// normalization, year-based splitting, in-year truncation, and a seeded
// synthetic generator with a documented grid->yield functional.

#include <cstdint>
#include <string>
#include <vector>

#include "ycvt/nd.hpp"

namespace ycvt::data {

// ------------------------------------------------------------------ samples

struct HistogramSample {
  int32_t county_id = 0;
  int32_t year = 0;
  double yield_bu_ac = 0.0;  // float-quantized, bushels per acre
  NdArray grid;              // [bands, bins, T], nonnegative, float-quantized
};

enum class Provenance : uint8_t { Synthetic = 0, External = 1, Params = 2 };

struct Dataset {
  std::vector<HistogramSample> samples;
  Provenance provenance = Provenance::Synthetic;
  int64_t bands = 11;
  int64_t bins = 32;
  int64_t intervals = 34;

  size_t size() const { return samples.size(); }
  std::vector<int32_t> years_present() const;
  /// Unique (county, year) pairs, homogeneous grid shape, finite values.
  void validate() const;
};

// ----------------------------------------------------------------- operations

/// Divides each (band, interval) bin column by its sum; all-zero columns stay
/// all-zero. Errors on negative counts.
NdArray normalize_histograms(const NdArray& raw);

struct SplitSpec {
  int32_t test_year = 0;
  double val_fraction = 0.10;
  uint64_t seed = 0;
};

struct Split {
  Dataset train, val, test;
};

/// test = samples of test_year; the pool of strictly earlier years splits
/// into val (seeded floor(val_fraction * |pool|) draw) and train. Exact
/// partition, original order preserved within each part.
Split split_by_year(const Dataset& ds, const SplitSpec& spec);

/// Keeps the first 19 of 34 intervals (day 49 through 201).
HistogramSample truncate_in_year(const HistogramSample& s);
Dataset truncate_in_year(const Dataset& ds);

// ----------------------------------------------------------------- generator

struct GeneratorParams {
  int64_t bands = 11;
  int64_t bins = 32;
  int64_t intervals = 34;
  int32_t year_from = 2014;
  int32_t year_to = 2021;
  double yield_mean = 45.26;
  double yield_std = 10.80;
  /// Noise level in target-std units; 0 makes yield an exact grid functional.
  double sigma_noise = 0.2;
  // Grid shape parameters: per-band seasonal bump over the bin axis whose
  // center drifts with the interval index and shifts with a latent vigor.
  double vigor_coupling = 2.5;  // bins per unit vigor
  double band_jitter = 0.6;     // per-sample per-band center jitter (bins)
  double bump_sigma = 2.5;      // bump width (bins)
  // Fixed standardization constants of the raw signal functional, calibrated
  // once for the defaults above so the yield moments land on mean/std.
  double signal_mean = 0.47405;
  double signal_std = 0.07756;

  std::string to_json() const;
  static GeneratorParams from_json(const std::string& text);
};

/// Deterministic given seed; yields calibrated to (yield_mean, yield_std).
Dataset generate_synthetic(int64_t n, uint64_t seed, const GeneratorParams& gen);

/// The documented signal functional: weighted band-mean trajectory of the
/// normalized grid (weights: per-band x seasonal half-sine over intervals),
/// band means taken as bin-position centers of mass scaled to [0,1].
double synthetic_signal_raw(const NdArray& grid);

/// Standardized signal (signal_mean/signal_std applied).
double synthetic_signal(const NdArray& grid, const GeneratorParams& gen);

// --------------------------------------------------------------- YLDH format

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

/// Named float32 tensors in the same container, record type "params".
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_params_file(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_params_file(const std::string& path);

/// FNV-1a content digest, for manifests.
uint64_t file_digest(const std::string& path);

// ------------------------------------------------------------------- batching

/// Stacks the chosen samples into a [N, bands, bins, T] array.
NdArray stack_batch(const Dataset& ds, const std::vector<size_t>& idx);
/// Targets of the chosen samples as [N, 1].
NdArray stack_targets(const Dataset& ds, const std::vector<size_t>& idx);

}  // namespace ycvt::data

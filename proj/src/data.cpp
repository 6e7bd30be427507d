#include "ycvt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ycvt/rng.hpp"

namespace ycvt::data {

namespace {
constexpr char kMagic[4] = {'Y', 'L', 'D', 'H'};
constexpr uint32_t kVersion = 1;
constexpr double kPi = 3.14159265358979323846;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
}  // namespace

// ------------------------------------------------------------------ dataset

std::vector<int32_t> Dataset::years_present() const {
  std::set<int32_t> years;
  for (const auto& s : samples) years.insert(s.year);
  return {years.begin(), years.end()};
}

void Dataset::validate() const {
  std::set<std::pair<int32_t, int32_t>> keys;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!keys.insert({s.county_id, s.year}).second)
      throw ValueError(cat("duplicate (county, year) pair (", s.county_id, ", ", s.year,
                           ") at sample ", i));
    if (s.grid.shape != Shape{bands, bins, intervals})
      throw ShapeError(cat("sample ", i, " grid shape ", shape_str(s.grid.shape),
                           " does not match dataset shape [", bands, ",", bins, ",",
                           intervals, "]"));
    if (!s.grid.all_finite() || !std::isfinite(s.yield_bu_ac))
      throw ValueError(cat("sample ", i, " contains non-finite values"));
  }
}

// ------------------------------------------------------------- normalization

NdArray normalize_histograms(const NdArray& raw) {
  if (raw.dim() != 3)
    throw ShapeError(cat("normalize_histograms expects [bands,bins,T], got ",
                         shape_str(raw.shape)));
  const int64_t bands = raw.shape[0], bins = raw.shape[1], t_len = raw.shape[2];
  NdArray out(raw.shape);
  for (int64_t b = 0; b < bands; ++b) {
    for (int64_t t = 0; t < t_len; ++t) {
      double sum = 0.0;
      for (int64_t i = 0; i < bins; ++i) {
        const double v = raw.data[static_cast<size_t>((b * bins + i) * t_len + t)];
        if (v < 0.0)
          throw ValueError(cat("negative count ", v, " at band ", b, " bin ", i,
                               " interval ", t));
        sum += v;
      }
      if (sum == 0.0) continue;  // all-zero column stays all-zero
      for (int64_t i = 0; i < bins; ++i) {
        const size_t at = static_cast<size_t>((b * bins + i) * t_len + t);
        out.data[at] = raw.data[at] / sum;
      }
    }
  }
  return out;
}

// ----------------------------------------------------------------- splitting

Split split_by_year(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0))
    throw ValueError(cat("val_fraction must be in (0,1), got ", spec.val_fraction));

  std::vector<size_t> pool_idx, test_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].year == spec.test_year)
      test_idx.push_back(i);
    else if (ds.samples[i].year < spec.test_year)
      pool_idx.push_back(i);
  }
  if (test_idx.empty()) {
    std::string years;
    for (int32_t y : ds.years_present()) years += cat(" ", y);
    throw ValueError(cat("no samples for test year ", spec.test_year,
                         "; available years:", years));
  }
  if (pool_idx.empty())
    throw ValueError(cat("no training samples before test year ", spec.test_year));

  const size_t n_val = static_cast<size_t>(
      std::floor(spec.val_fraction * static_cast<double>(pool_idx.size())));
  std::vector<size_t> shuffled = pool_idx;
  Rng rng(spec.seed);
  rng.shuffle(shuffled);
  std::set<size_t> val_set(shuffled.begin(), shuffled.begin() + static_cast<long>(n_val));

  Split out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->provenance = ds.provenance;
    part->bands = ds.bands;
    part->bins = ds.bins;
    part->intervals = ds.intervals;
  }
  for (size_t i : pool_idx) {
    if (val_set.count(i))
      out.val.samples.push_back(ds.samples[i]);
    else
      out.train.samples.push_back(ds.samples[i]);
  }
  for (size_t i : test_idx) out.test.samples.push_back(ds.samples[i]);
  return out;
}

// ---------------------------------------------------------------- truncation

HistogramSample truncate_in_year(const HistogramSample& s) {
  if (s.grid.dim() != 3 || s.grid.shape[2] != 34)
    throw ShapeError(cat("in-year truncation needs 34 intervals, sample has ",
                         shape_str(s.grid.shape)));
  const int64_t bands = s.grid.shape[0], bins = s.grid.shape[1];
  constexpr int64_t kept = 19;
  HistogramSample out;
  out.county_id = s.county_id;
  out.year = s.year;
  out.yield_bu_ac = s.yield_bu_ac;
  out.grid = NdArray({bands, bins, kept});
  for (int64_t b = 0; b < bands; ++b)
    for (int64_t i = 0; i < bins; ++i)
      for (int64_t t = 0; t < kept; ++t)
        out.grid.data[static_cast<size_t>((b * bins + i) * kept + t)] =
            s.grid.data[static_cast<size_t>((b * bins + i) * 34 + t)];
  return out;
}

Dataset truncate_in_year(const Dataset& ds) {
  Dataset out;
  out.provenance = ds.provenance;
  out.bands = ds.bands;
  out.bins = ds.bins;
  out.intervals = 19;
  out.samples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) out.samples.push_back(truncate_in_year(s));
  return out;
}

// ----------------------------------------------------------------- generator

namespace {

// Fixed per-band shape constants of the generative model.
double band_base(int64_t b, const GeneratorParams& g) {
  return 12.0 + 6.0 * std::sin(2.0 * kPi * static_cast<double>(b) / static_cast<double>(g.bands) + 0.3);
}
double band_amp(int64_t b, const GeneratorParams& g) {
  return 4.0 + 1.5 * std::cos(2.0 * kPi * static_cast<double>(b) / static_cast<double>(g.bands));
}
double band_weight(int64_t b, int64_t bands) {
  return 1.0 + 0.25 * std::sin(2.0 * kPi * static_cast<double>(b) / static_cast<double>(bands) + 0.7);
}
double season_weight(int64_t t, int64_t intervals) {
  return std::sin(kPi * (static_cast<double>(t) + 0.5) / static_cast<double>(intervals));
}

}  // namespace

double synthetic_signal_raw(const NdArray& grid) {
  const int64_t bands = grid.shape[0], bins = grid.shape[1], t_len = grid.shape[2];
  double acc = 0.0, wsum = 0.0;
  for (int64_t b = 0; b < bands; ++b) {
    const double ub = band_weight(b, bands);
    for (int64_t t = 0; t < t_len; ++t) {
      double mass = 0.0, moment = 0.0;
      for (int64_t i = 0; i < bins; ++i) {
        const double v = grid.data[static_cast<size_t>((b * bins + i) * t_len + t)];
        mass += v;
        moment += static_cast<double>(i) * v;
      }
      if (mass == 0.0) continue;
      const double center = moment / mass / static_cast<double>(bins - 1);
      const double w = ub * season_weight(t, t_len);
      acc += w * center;
      wsum += w;
    }
  }
  return wsum > 0.0 ? acc / wsum : 0.0;
}

double synthetic_signal(const NdArray& grid, const GeneratorParams& gen) {
  return (synthetic_signal_raw(grid) - gen.signal_mean) / gen.signal_std;
}

Dataset generate_synthetic(int64_t n, uint64_t seed, const GeneratorParams& gen) {
  if (n < 1) throw ValueError(cat("sample count must be >= 1, got ", n));
  if (gen.year_to < gen.year_from)
    throw ValueError(cat("year range ", gen.year_from, "..", gen.year_to, " is empty"));

  Dataset ds;
  ds.provenance = Provenance::Synthetic;
  ds.bands = gen.bands;
  ds.bins = gen.bins;
  ds.intervals = gen.intervals;
  ds.samples.reserve(static_cast<size_t>(n));

  Rng rng(seed);
  const int32_t n_years = gen.year_to - gen.year_from + 1;
  const double signal_weight = std::sqrt(std::max(0.0, 1.0 - gen.sigma_noise * gen.sigma_noise));

  for (int64_t s = 0; s < n; ++s) {
    const double vigor = rng.normal();
    std::vector<double> jitter(static_cast<size_t>(gen.bands));
    for (auto& j : jitter) j = rng.normal(0.0, gen.band_jitter);
    const double eta = rng.normal();

    HistogramSample sample;
    sample.county_id = static_cast<int32_t>(10000 + s);
    sample.year = gen.year_from + static_cast<int32_t>(s % n_years);
    sample.grid = NdArray({gen.bands, gen.bins, gen.intervals});

    for (int64_t b = 0; b < gen.bands; ++b) {
      const double base = band_base(b, gen);
      const double amp = band_amp(b, gen);
      for (int64_t t = 0; t < gen.intervals; ++t) {
        double center = base + amp * season_weight(t, gen.intervals) +
                        gen.vigor_coupling * vigor + jitter[static_cast<size_t>(b)];
        center = std::clamp(center, 1.0, static_cast<double>(gen.bins) - 2.0);
        double sum = 0.0;
        std::vector<double> col(static_cast<size_t>(gen.bins));
        for (int64_t i = 0; i < gen.bins; ++i) {
          const double d = (static_cast<double>(i) - center) / gen.bump_sigma;
          col[static_cast<size_t>(i)] = std::exp(-0.5 * d * d);
          sum += col[static_cast<size_t>(i)];
        }
        for (int64_t i = 0; i < gen.bins; ++i)
          sample.grid.data[static_cast<size_t>((b * gen.bins + i) * gen.intervals + t)] =
              quantize_f32(col[static_cast<size_t>(i)] / sum);
      }
    }

    const double z = synthetic_signal(sample.grid, gen);
    double y = gen.yield_mean + gen.yield_std * (signal_weight * z + gen.sigma_noise * eta);
    y = std::max(y, 0.5);  // keeps the positive-yield invariant; ~never binds
    sample.yield_bu_ac = quantize_f32(y);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

std::string GeneratorParams::to_json() const {
  nlohmann::json j;
  j["bands"] = bands;
  j["bins"] = bins;
  j["intervals"] = intervals;
  j["year_from"] = year_from;
  j["year_to"] = year_to;
  j["yield_mean"] = yield_mean;
  j["yield_std"] = yield_std;
  j["sigma_noise"] = sigma_noise;
  j["vigor_coupling"] = vigor_coupling;
  j["band_jitter"] = band_jitter;
  j["bump_sigma"] = bump_sigma;
  j["signal_mean"] = signal_mean;
  j["signal_std"] = signal_std;
  return j.dump(2);
}

GeneratorParams GeneratorParams::from_json(const std::string& text) {
  GeneratorParams g;
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.contains("bands")) g.bands = j["bands"].get<int64_t>();
  if (j.contains("bins")) g.bins = j["bins"].get<int64_t>();
  if (j.contains("intervals")) g.intervals = j["intervals"].get<int64_t>();
  if (j.contains("year_from")) g.year_from = j["year_from"].get<int32_t>();
  if (j.contains("year_to")) g.year_to = j["year_to"].get<int32_t>();
  if (j.contains("yield_mean")) g.yield_mean = j["yield_mean"].get<double>();
  if (j.contains("yield_std")) g.yield_std = j["yield_std"].get<double>();
  if (j.contains("sigma_noise")) g.sigma_noise = j["sigma_noise"].get<double>();
  if (j.contains("vigor_coupling")) g.vigor_coupling = j["vigor_coupling"].get<double>();
  if (j.contains("band_jitter")) g.band_jitter = j["band_jitter"].get<double>();
  if (j.contains("bump_sigma")) g.bump_sigma = j["bump_sigma"].get<double>();
  if (j.contains("signal_mean")) g.signal_mean = j["signal_mean"].get<double>();
  if (j.contains("signal_std")) g.signal_std = j["signal_std"].get<double>();
  return g;
}

// --------------------------------------------------------------- YLDH format

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_i32(std::string& buf, int32_t v) { put_u32(buf, static_cast<uint32_t>(v)); }
void put_f32(std::string& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  uint32_t u32(const std::string& what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<size_t>(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  int32_t i32(const std::string& what) { return static_cast<int32_t>(u32(what)); }
  float f32(const std::string& what) {
    uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  uint8_t u8(const std::string& what) {
    need(1, what);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  std::string raw(size_t n, const std::string& what) {
    need(n, what);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n, const std::string& what) {
    if (pos_ + n > bytes_.size())
      throw IoError(IoErrorKind::Truncated,
                    cat(path_, ": truncated while reading ", what, " (offset ", pos_,
                        " of ", bytes_.size(), " bytes)"));
  }
  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::OpenFailed, cat("cannot open ", path));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::OpenFailed, cat("cannot open ", path, " for writing"));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrorKind::OpenFailed, cat("short write to ", path));
}

std::string header_bytes(uint32_t n, uint32_t bands, uint32_t bins, uint32_t intervals,
                         uint8_t record_type) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, n);
  put_u32(buf, bands);
  put_u32(buf, bins);
  put_u32(buf, intervals);
  buf.push_back(static_cast<char>(record_type));
  return buf;
}

struct Header {
  uint32_t n, bands, bins, intervals;
  uint8_t record_type;
};

Header read_header(Reader& r, const std::string& path) {
  const std::string magic = r.raw(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw IoError(IoErrorKind::BadMagic, cat(path, ": bad magic, not a YLDH file"));
  const uint32_t version = r.u32("version");
  if (version != kVersion)
    throw IoError(IoErrorKind::BadVersion,
                  cat(path, ": unsupported format version ", version, " (expected ", kVersion, ")"));
  Header h;
  h.n = r.u32("record count");
  h.bands = r.u32("bands");
  h.bins = r.u32("bins");
  h.intervals = r.u32("intervals");
  h.record_type = r.u8("record type");
  return h;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::string buf = header_bytes(static_cast<uint32_t>(ds.samples.size()),
                                 static_cast<uint32_t>(ds.bands),
                                 static_cast<uint32_t>(ds.bins),
                                 static_cast<uint32_t>(ds.intervals),
                                 static_cast<uint8_t>(ds.provenance));
  const size_t grid_len = static_cast<size_t>(ds.bands * ds.bins * ds.intervals);
  for (const auto& s : ds.samples) {
    if (s.grid.data.size() != grid_len)
      throw ShapeError(cat("sample grid ", shape_str(s.grid.shape),
                           " does not match dataset header"));
    put_i32(buf, s.county_id);
    put_i32(buf, s.year);
    put_f32(buf, static_cast<float>(s.yield_bu_ac));
    for (double v : s.grid.data) put_f32(buf, static_cast<float>(v));
  }
  write_file(path, buf);
}

Dataset read_dataset(const std::string& path) {
  Reader r(slurp(path), path);
  const Header h = read_header(r, path);
  if (h.record_type > 1)
    throw IoError(IoErrorKind::Corrupt,
                  cat(path, ": record type ", static_cast<int>(h.record_type),
                      " is not a dataset (params file?)"));
  Dataset ds;
  ds.provenance = static_cast<Provenance>(h.record_type);
  ds.bands = h.bands;
  ds.bins = h.bins;
  ds.intervals = h.intervals;
  const int64_t grid_len = ds.bands * ds.bins * ds.intervals;
  ds.samples.reserve(h.n);
  for (uint32_t i = 0; i < h.n; ++i) {
    const std::string what = cat("sample ", i);
    HistogramSample s;
    s.county_id = r.i32(what);
    s.year = r.i32(what);
    s.yield_bu_ac = static_cast<double>(r.f32(what));
    s.grid = NdArray({ds.bands, ds.bins, ds.intervals});
    for (int64_t k = 0; k < grid_len; ++k)
      s.grid.data[static_cast<size_t>(k)] = static_cast<double>(r.f32(what));
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end())
    throw IoError(IoErrorKind::Corrupt, cat(path, ": trailing bytes after last sample"));
  return ds;
}

void write_params_file(const std::string& path, const std::vector<NamedArray>& arrays) {
  std::string buf = header_bytes(static_cast<uint32_t>(arrays.size()), 0, 0, 0,
                                 static_cast<uint8_t>(Provenance::Params));
  for (const auto& a : arrays) {
    put_u32(buf, static_cast<uint32_t>(a.name.size()));
    buf.append(a.name);
    put_u32(buf, static_cast<uint32_t>(a.shape.size()));
    int64_t numel = 1;
    for (int64_t e : a.shape) {
      put_u32(buf, static_cast<uint32_t>(e));
      numel *= e;
    }
    if (static_cast<int64_t>(a.values.size()) != numel)
      throw ShapeError(cat("named array '", a.name, "' has ", a.values.size(),
                           " values for shape ", shape_str(a.shape)));
    for (float v : a.values) put_f32(buf, v);
  }
  write_file(path, buf);
}

std::vector<NamedArray> read_params_file(const std::string& path) {
  Reader r(slurp(path), path);
  const Header h = read_header(r, path);
  if (h.record_type != static_cast<uint8_t>(Provenance::Params))
    throw IoError(IoErrorKind::Corrupt,
                  cat(path, ": record type ", static_cast<int>(h.record_type),
                      " is not a params file"));
  std::vector<NamedArray> out;
  out.reserve(h.n);
  for (uint32_t i = 0; i < h.n; ++i) {
    const std::string what = cat("tensor ", i);
    NamedArray a;
    const uint32_t name_len = r.u32(what);
    a.name = r.raw(name_len, what);
    const uint32_t rank = r.u32(what);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t e = r.u32(what);
      a.shape.push_back(static_cast<int64_t>(e));
      numel *= e;
    }
    a.values.resize(static_cast<size_t>(numel));
    for (int64_t k = 0; k < numel; ++k) a.values[static_cast<size_t>(k)] = r.f32(what);
    out.push_back(std::move(a));
  }
  if (!r.at_end())
    throw IoError(IoErrorKind::Corrupt, cat(path, ": trailing bytes after last tensor"));
  return out;
}

uint64_t file_digest(const std::string& path) {
  const std::string bytes = slurp(path);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ------------------------------------------------------------------- batching

NdArray stack_batch(const Dataset& ds, const std::vector<size_t>& idx) {
  if (idx.empty()) throw ValueError("stack_batch: empty index list");
  NdArray out({static_cast<int64_t>(idx.size()), ds.bands, ds.bins, ds.intervals});
  const int64_t chunk = ds.bands * ds.bins * ds.intervals;
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& g = ds.samples[idx[i]].grid;
    if (g.numel() != chunk)
      throw ShapeError(cat("sample ", idx[i], " grid ", shape_str(g.shape),
                           " mismatches dataset shape"));
    std::copy(g.data.begin(), g.data.end(),
              out.data.begin() + static_cast<long>(i) * chunk);
  }
  return out;
}

NdArray stack_targets(const Dataset& ds, const std::vector<size_t>& idx) {
  NdArray out({static_cast<int64_t>(idx.size()), 1});
  for (size_t i = 0; i < idx.size(); ++i) out.data[i] = ds.samples[idx[i]].yield_bu_ac;
  return out;
}

}  // namespace ycvt::data

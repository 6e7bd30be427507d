#include "ycvt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ycvt/data.hpp"
#include "ycvt/rng.hpp"

namespace ycvt::model {

// ------------------------------------------------------------- configuration

void ModelConfig::validate() const {
  if (stages.size() != 3)
    throw ValueError(cat("model must have exactly 3 stages, got ", stages.size()));
  if (output_dim != 1)
    throw ValueError(cat("regression head output_dim must be 1, got ", output_dim));
  for (size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    if (s.embed_dim % s.num_heads != 0)
      throw ValueError(cat("stage ", i, ": embed_dim ", s.embed_dim,
                           " not divisible by num_heads ", s.num_heads));
    if (s.kv_stride != 1 && s.kv_stride != 2)
      throw ValueError(cat("stage ", i, ": kv_stride must be 1 or 2, got ", s.kv_stride));
    if (s.q_stride != 1)
      throw ValueError(cat("stage ", i, ": q_stride is fixed at 1, got ", s.q_stride));
    const bool last = (i + 1 == stages.size());
    if (s.has_cls_token != last)
      throw ValueError(cat("stage ", i, ": cls token belongs to the final stage only"));
    if (s.mlp_ratio <= 0.0)
      throw ValueError(cat("stage ", i, ": mlp_ratio must be positive"));
  }
}

ModelConfig preset(const std::string& name) {
  // Stage dims/heads/depths follow the reference CvT family; tiny is a
  // desk-scale configuration for tests.
  struct Row {
    const char* name;
    int64_t dims[3], heads[3], depths[3];
  };
  static const Row rows[] = {
      {"cvt13", {64, 192, 384}, {1, 3, 6}, {1, 2, 10}},
      {"cvt21", {64, 192, 384}, {1, 3, 6}, {1, 4, 16}},
      {"cvtw24", {192, 768, 1024}, {3, 12, 16}, {2, 2, 20}},
      {"tiny", {16, 32, 64}, {1, 2, 4}, {1, 1, 2}},
  };
  for (const Row& r : rows) {
    if (name != r.name) continue;
    ModelConfig cfg;
    const int64_t patch[3][3] = {{7, 4, 2}, {3, 2, 1}, {3, 2, 1}};  // k, s, p
    for (int i = 0; i < 3; ++i) {
      StageConfig s;
      s.patch_kernel = patch[i][0];
      s.patch_stride = patch[i][1];
      s.patch_padding = patch[i][2];
      s.embed_dim = r.dims[i];
      s.num_heads = r.heads[i];
      s.depth = r.depths[i];
      s.mlp_ratio = 4.0;
      s.kv_stride = 2;
      s.has_cls_token = (i == 2);
      cfg.stages.push_back(s);
    }
    cfg.validate();
    return cfg;
  }
  throw ValueError(cat("unknown model preset '", name, "'"));
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"cvt13", "cvt21", "cvtw24", "tiny"};
  return names;
}

std::vector<std::pair<int64_t, int64_t>> stage_token_extents(const ModelConfig& cfg) {
  std::vector<std::pair<int64_t, int64_t>> out;
  int64_t h = cfg.input_height, w = cfg.input_width;
  for (const StageConfig& s : cfg.stages) {
    h = fwd::conv_out_extent(h, s.patch_kernel, s.patch_padding, s.patch_stride);
    w = fwd::conv_out_extent(w, s.patch_kernel, s.patch_padding, s.patch_stride);
    out.emplace_back(h, w);
  }
  return out;
}

// ----------------------------------------------------------------- ParamStore

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ValueError(cat("duplicate parameter name '", name, "'"));
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(t));
  return entries_.back().second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError(cat("missing parameter '", name, "'"));
  return entries_[it->second].second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError(cat("missing parameter '", name, "'"));
  return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

int64_t ParamStore::total_params() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void for_each_param(const ModelConfig& cfg,
                    const std::function<void(const std::string&, const Shape&)>& fn) {
  cfg.validate();
  int64_t c_in = cfg.input_channels;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const StageConfig& s = cfg.stages[i];
    const int64_t d = s.embed_dim;
    const std::string sb = cat("stage", i, ".");
    fn(sb + "embed.conv.weight", {d, c_in, s.patch_kernel, s.patch_kernel});
    fn(sb + "embed.conv.bias", {d});
    fn(sb + "embed.norm.gamma", {d});
    fn(sb + "embed.norm.beta", {d});
    const int64_t hidden = static_cast<int64_t>(std::llround(s.mlp_ratio * static_cast<double>(d)));
    for (int64_t b = 0; b < s.depth; ++b) {
      const std::string bb = cat(sb, "block", b, ".");
      fn(bb + "norm1.gamma", {d});
      fn(bb + "norm1.beta", {d});
      for (const char* role : {"q", "k", "v"}) {
        fn(cat(bb, "attn.", role, ".dw.weight"), {d, 1, 3, 3});
        fn(cat(bb, "attn.", role, ".norm.gamma"), {d});
        fn(cat(bb, "attn.", role, ".norm.beta"), {d});
        fn(cat(bb, "attn.", role, ".proj.weight"), {d, d});
        fn(cat(bb, "attn.", role, ".proj.bias"), {d});
      }
      fn(bb + "attn.out.weight", {d, d});
      fn(bb + "attn.out.bias", {d});
      fn(bb + "norm2.gamma", {d});
      fn(bb + "norm2.beta", {d});
      fn(bb + "mlp.fc1.weight", {d, hidden});
      fn(bb + "mlp.fc1.bias", {hidden});
      fn(bb + "mlp.fc2.weight", {hidden, d});
      fn(bb + "mlp.fc2.bias", {d});
    }
    c_in = d;
  }
  const int64_t d_last = cfg.stages.back().embed_dim;
  fn("cls_token", {d_last});
  fn("head.norm.gamma", {d_last});
  fn("head.norm.beta", {d_last});
  if (cfg.head_hidden.has_value()) {
    fn("head.fc1.weight", {d_last, *cfg.head_hidden});
    fn("head.fc1.bias", {*cfg.head_hidden});
    fn("head.fc2.weight", {*cfg.head_hidden, cfg.output_dim});
    fn("head.fc2.bias", {cfg.output_dim});
  } else {
    fn("head.fc.weight", {d_last, cfg.output_dim});
    fn("head.fc.bias", {cfg.output_dim});
  }
}

int64_t param_count(const ModelConfig& cfg) {
  int64_t n = 0;
  for_each_param(cfg, [&](const std::string&, const Shape& shape) { n += shape_numel(shape); });
  return n;
}

namespace {

enum class ParamKind { Weight, Bias, Gamma, Beta, Cls };

ParamKind kind_of(const std::string& name) {
  auto ends_with = [&](const char* suffix) {
    const size_t len = std::strlen(suffix);
    return name.size() >= len && name.compare(name.size() - len, len, suffix) == 0;
  };
  if (name == "cls_token") return ParamKind::Cls;
  if (ends_with(".gamma")) return ParamKind::Gamma;
  if (ends_with(".beta")) return ParamKind::Beta;
  if (ends_with(".bias")) return ParamKind::Bias;
  return ParamKind::Weight;
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  for_each_param(cfg, [&](const std::string& name, const Shape& shape) {
    NdArray arr(shape);
    switch (kind_of(name)) {
      case ParamKind::Weight:
        for (auto& v : arr.data) v = rng.truncated_normal(0.02);
        break;
      case ParamKind::Gamma:
        for (auto& v : arr.data) v = 1.0;
        break;
      case ParamKind::Bias:
      case ParamKind::Beta:
      case ParamKind::Cls:
        break;  // zeros
    }
    store.add(name, Tensor(std::move(arr), /*requires_grad=*/true));
  });
  return store;
}

ParamStore init_params_gradcheck(const ModelConfig& cfg, uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  for_each_param(cfg, [&](const std::string& name, const Shape& shape) {
    NdArray arr(shape);
    switch (kind_of(name)) {
      case ParamKind::Weight: {
        int64_t fan_in = shape.size() >= 2 ? shape[0] : shape[0];
        if (shape.size() == 4) fan_in = shape[1] * shape[2] * shape[3];
        const double sigma = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
        for (auto& v : arr.data) v = rng.normal(0.0, sigma);
        break;
      }
      case ParamKind::Gamma:
        for (auto& v : arr.data) v = 1.0 + rng.normal(0.0, 0.1);
        break;
      case ParamKind::Bias:
      case ParamKind::Beta:
        for (auto& v : arr.data) v = rng.normal(0.0, 0.1);
        break;
      case ParamKind::Cls:
        for (auto& v : arr.data) v = rng.normal(0.0, 0.5);
        break;
    }
    store.add(name, Tensor(std::move(arr), /*requires_grad=*/true));
  });
  return store;
}

// ------------------------------------------------------ forward (autograd)

TokenMap conv_token_embedding(const Tensor& x, int stage_idx, const StageConfig& stage,
                              const ParamStore& params) {
  const std::string base = cat("stage", stage_idx, ".embed.");
  fwd::Conv2dSpec spec;
  spec.stride_h = spec.stride_w = stage.patch_stride;
  spec.pad_h = spec.pad_w = stage.patch_padding;
  Tensor y = conv2d(x, params.get(base + "conv.weight"), params.get(base + "conv.bias"), spec);
  const int64_t n = y.shape()[0], d = y.shape()[1], h = y.shape()[2], w = y.shape()[3];
  Tensor tokens = reshape(permute(y, {0, 2, 3, 1}), {n, h * w, d});
  tokens = layer_norm(tokens, params.get(base + "norm.gamma"), params.get(base + "norm.beta"));
  return {tokens, h, w, false};
}

TokenMap conv_projection(const TokenMap& t, int stage_idx, int block_idx, ProjRole role,
                         int64_t stride, const ParamStore& params, ProjNorm norm) {
  if (stride != 1 && stride != 2)
    throw ValueError(cat("conv_projection stride must be 1 or 2, got ", stride));
  const char* role_name = role == ProjRole::Query ? "q" : role == ProjRole::Key ? "k" : "v";
  const std::string base = cat("stage", stage_idx, ".block", block_idx, ".attn.", role_name, ".");
  const int64_t n = t.tokens.shape()[0], d = t.tokens.shape()[2];

  Tensor cls, spatial;
  if (t.has_cls) {
    cls = narrow(t.tokens, 1, 0, 1);
    spatial = narrow(t.tokens, 1, 1, t.tokens.shape()[1] - 1);
  } else {
    spatial = t.tokens;
  }
  Tensor img = permute(reshape(spatial, {n, t.h, t.w, d}), {0, 3, 1, 2});
  fwd::Conv2dSpec spec;
  spec.stride_h = spec.stride_w = stride;
  spec.pad_h = spec.pad_w = 1;
  spec.groups = d;
  Tensor conv = conv2d(img, params.get(base + "dw.weight"), std::nullopt, spec);
  const int64_t ho = conv.shape()[2], wo = conv.shape()[3];
  Tensor flat = reshape(permute(conv, {0, 2, 3, 1}), {n, ho * wo, d});
  if (norm == ProjNorm::LayerNorm)
    flat = layer_norm(flat, params.get(base + "norm.gamma"), params.get(base + "norm.beta"));
  else
    flat = channel_norm_batch(flat, params.get(base + "norm.gamma"),
                              params.get(base + "norm.beta"));
  Tensor joined = t.has_cls ? concat({cls, flat}, 1) : flat;
  Tensor proj = linear(joined, params.get(base + "proj.weight"), params.get(base + "proj.bias"));
  return {proj, ho, wo, t.has_cls};
}

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, int64_t num_heads) {
  const int64_t n = q.shape()[0], lq = q.shape()[1], d = q.shape()[2];
  const int64_t lk = k.shape()[1];
  if (d % num_heads != 0)
    throw ValueError(cat("embed dim ", d, " not divisible by num_heads ", num_heads));
  const int64_t dh = d / num_heads;
  Tensor qh = permute(reshape(q, {n, lq, num_heads, dh}), {0, 2, 1, 3});
  Tensor kh = permute(reshape(k, {n, lk, num_heads, dh}), {0, 2, 3, 1});
  Tensor vh = permute(reshape(v, {n, lk, num_heads, dh}), {0, 2, 1, 3});
  Tensor scores = scale(matmul(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor attn = softmax_lastdim(scores);
  Tensor ctx = matmul(attn, vh);
  return reshape(permute(ctx, {0, 2, 1, 3}), {n, lq, d});
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int64_t num_heads, const Tensor& out_w, const Tensor& out_b) {
  return linear(attention_core(q, k, v, num_heads), out_w, out_b);
}

TokenMap cvt_block(const TokenMap& t, int stage_idx, int block_idx, const StageConfig& stage,
                   const ParamStore& params, ProjNorm norm) {
  const std::string base = cat("stage", stage_idx, ".block", block_idx, ".");
  TokenMap ln1 = t;
  ln1.tokens = layer_norm(t.tokens, params.get(base + "norm1.gamma"),
                          params.get(base + "norm1.beta"));
  TokenMap q = conv_projection(ln1, stage_idx, block_idx, ProjRole::Query, stage.q_stride,
                               params, norm);
  TokenMap k = conv_projection(ln1, stage_idx, block_idx, ProjRole::Key, stage.kv_stride,
                               params, norm);
  TokenMap v = conv_projection(ln1, stage_idx, block_idx, ProjRole::Value, stage.kv_stride,
                               params, norm);
  Tensor attn = multi_head_attention(q.tokens, k.tokens, v.tokens, stage.num_heads,
                                     params.get(base + "attn.out.weight"),
                                     params.get(base + "attn.out.bias"));
  Tensor x1 = add(t.tokens, attn);
  Tensor ln2 = layer_norm(x1, params.get(base + "norm2.gamma"), params.get(base + "norm2.beta"));
  Tensor hidden = gelu(linear(ln2, params.get(base + "mlp.fc1.weight"),
                              params.get(base + "mlp.fc1.bias")));
  Tensor mlp = linear(hidden, params.get(base + "mlp.fc2.weight"),
                      params.get(base + "mlp.fc2.bias"));
  return {add(x1, mlp), t.h, t.w, t.has_cls};
}

Tensor forward(const Tensor& x, const ModelConfig& cfg, const ParamStore& params,
               std::vector<StageTrace>* trace) {
  if (x.dim() != 4 || x.shape()[1] != cfg.input_channels ||
      x.shape()[2] != cfg.input_height || x.shape()[3] != cfg.input_width)
    throw ShapeError(cat("model input must be [N,", cfg.input_channels, ",",
                         cfg.input_height, ",", cfg.input_width, "], got ",
                         shape_str(x.shape())));
  if (trace) trace->clear();
  Tensor img = x;
  TokenMap tm;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const StageConfig& stage = cfg.stages[i];
    if (i > 0) {
      const int64_t n = tm.tokens.shape()[0], d = tm.tokens.shape()[2];
      img = permute(reshape(tm.tokens, {n, tm.h, tm.w, d}), {0, 3, 1, 2});
    }
    tm = conv_token_embedding(img, static_cast<int>(i), stage, params);
    if (stage.has_cls_token) {
      const Tensor& cls = params.get("cls_token");
      Tensor tok = tile0(reshape(cls, {1, 1, cls.numel()}), tm.tokens.shape()[0]);
      tm.tokens = concat({tok, tm.tokens}, 1);
      tm.has_cls = true;
    }
    for (int64_t b = 0; b < stage.depth; ++b)
      tm = cvt_block(tm, static_cast<int>(i), static_cast<int>(b), stage, params, cfg.proj_norm);
    if (trace) trace->push_back({tm.h, tm.w, tm.len(), tm.has_cls});
  }
  const int64_t n = tm.tokens.shape()[0], d = tm.tokens.shape()[2];
  Tensor cls = narrow(tm.tokens, 1, 0, 1);
  cls = layer_norm(cls, params.get("head.norm.gamma"), params.get("head.norm.beta"));
  Tensor flat = reshape(cls, {n, d});
  if (cfg.head_hidden.has_value()) {
    Tensor hidden = gelu(linear(flat, params.get("head.fc1.weight"), params.get("head.fc1.bias")));
    return linear(hidden, params.get("head.fc2.weight"), params.get("head.fc2.bias"));
  }
  return linear(flat, params.get("head.fc.weight"), params.get("head.fc.bias"));
}

// ------------------------------------------------------------- checkpoints

namespace {

std::vector<float> encode_config(const ModelConfig& cfg) {
  std::vector<float> v;
  v.push_back(static_cast<float>(cfg.input_channels));
  v.push_back(static_cast<float>(cfg.input_height));
  v.push_back(static_cast<float>(cfg.input_width));
  v.push_back(static_cast<float>(cfg.output_dim));
  v.push_back(cfg.head_hidden ? static_cast<float>(*cfg.head_hidden) : -1.0f);
  v.push_back(static_cast<float>(static_cast<int>(cfg.proj_norm)));
  v.push_back(static_cast<float>(cfg.stages.size()));
  for (const StageConfig& s : cfg.stages) {
    v.push_back(static_cast<float>(s.patch_kernel));
    v.push_back(static_cast<float>(s.patch_stride));
    v.push_back(static_cast<float>(s.patch_padding));
    v.push_back(static_cast<float>(s.embed_dim));
    v.push_back(static_cast<float>(s.num_heads));
    v.push_back(static_cast<float>(s.depth));
    v.push_back(static_cast<float>(s.mlp_ratio));
    v.push_back(static_cast<float>(s.q_stride));
    v.push_back(static_cast<float>(s.kv_stride));
    v.push_back(s.has_cls_token ? 1.0f : 0.0f);
  }
  return v;
}

ModelConfig decode_config(const std::vector<float>& v) {
  if (v.size() < 7) throw IoError(IoErrorKind::Corrupt, "checkpoint model_config too short");
  ModelConfig cfg;
  size_t at = 0;
  cfg.input_channels = static_cast<int64_t>(v[at++]);
  cfg.input_height = static_cast<int64_t>(v[at++]);
  cfg.input_width = static_cast<int64_t>(v[at++]);
  cfg.output_dim = static_cast<int64_t>(v[at++]);
  const float hh = v[at++];
  if (hh >= 0.0f) cfg.head_hidden = static_cast<int64_t>(hh);
  cfg.proj_norm = static_cast<ProjNorm>(static_cast<int>(v[at++]));
  const size_t n_stages = static_cast<size_t>(v[at++]);
  if (v.size() != 7 + 10 * n_stages)
    throw IoError(IoErrorKind::Corrupt, "checkpoint model_config length mismatch");
  for (size_t i = 0; i < n_stages; ++i) {
    StageConfig s;
    s.patch_kernel = static_cast<int64_t>(v[at++]);
    s.patch_stride = static_cast<int64_t>(v[at++]);
    s.patch_padding = static_cast<int64_t>(v[at++]);
    s.embed_dim = static_cast<int64_t>(v[at++]);
    s.num_heads = static_cast<int64_t>(v[at++]);
    s.depth = static_cast<int64_t>(v[at++]);
    s.mlp_ratio = static_cast<double>(v[at++]);
    s.q_stride = static_cast<int64_t>(v[at++]);
    s.kv_stride = static_cast<int64_t>(v[at++]);
    s.has_cls_token = v[at++] != 0.0f;
    cfg.stages.push_back(s);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedModel& m) {
  std::vector<data::NamedArray> arrays;
  arrays.push_back({"__meta__.model_config", {static_cast<int64_t>(encode_config(m.cfg).size())},
                    encode_config(m.cfg)});
  arrays.push_back({"__meta__.target_scaler", {2},
                    {static_cast<float>(m.target_mean), static_cast<float>(m.target_std)}});
  for (const auto& [name, t] : m.params.entries()) {
    data::NamedArray a;
    a.name = name;
    a.shape = t.shape();
    a.values.reserve(t.value().data.size());
    for (double v : t.value().data) a.values.push_back(static_cast<float>(v));
    arrays.push_back(std::move(a));
  }
  data::write_params_file(path, arrays);
}

TrainedModel load_checkpoint(const std::string& path) {
  const std::vector<data::NamedArray> arrays = data::read_params_file(path);
  TrainedModel m;
  std::unordered_map<std::string, const data::NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;

  auto meta_cfg = by_name.find("__meta__.model_config");
  if (meta_cfg == by_name.end())
    throw IoError(IoErrorKind::Corrupt, cat(path, ": checkpoint lacks model config record"));
  m.cfg = decode_config(meta_cfg->second->values);

  auto meta_scaler = by_name.find("__meta__.target_scaler");
  if (meta_scaler == by_name.end() || meta_scaler->second->values.size() != 2)
    throw IoError(IoErrorKind::Corrupt, cat(path, ": checkpoint lacks target scaler record"));
  m.target_mean = static_cast<double>(meta_scaler->second->values[0]);
  m.target_std = static_cast<double>(meta_scaler->second->values[1]);

  for_each_param(m.cfg, [&](const std::string& name, const Shape& shape) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError(IoErrorKind::Corrupt, cat(path, ": checkpoint missing parameter '", name, "'"));
    const data::NamedArray& a = *it->second;
    if (a.shape != shape)
      throw IoError(IoErrorKind::Corrupt,
                    cat(path, ": parameter '", name, "' has shape ", shape_str(a.shape),
                        ", expected ", shape_str(shape)));
    NdArray arr(shape);
    for (size_t i = 0; i < a.values.size(); ++i) arr.data[i] = static_cast<double>(a.values[i]);
    m.params.add(name, Tensor(std::move(arr), /*requires_grad=*/true));
  });
  return m;
}

void round_params_f32(ParamStore& params) {
  for (auto& [name, t] : params.entries())
    for (double& v : t.mutable_value().data)
      v = static_cast<double>(static_cast<float>(v));
}

// ------------------------------------------------------------ model gradcheck

PlainParamMap<double> plain_view(const ParamStore& params) {
  PlainParamMap<double> map;
  for (const auto& [name, t] : params.entries()) map[name] = &t.value();
  return map;
}

ModelGradCheck run_model_gradcheck(const ModelConfig& cfg, uint64_t seed, double eps,
                                   const std::string& corrupt_name) {
  cfg.validate();
  ParamStore init = init_params_gradcheck(cfg, seed);

  std::vector<std::string> names;
  std::vector<NdArray> inputs;
  names.push_back("input");
  {
    Rng rng(derive_seed(seed, {0xDA7A}));
    NdArray grid({1, cfg.input_channels, cfg.input_height, cfg.input_width});
    for (auto& v : grid.data) v = rng.uniform(0.05, 1.0);
    inputs.push_back(std::move(grid));
  }
  for (const auto& [name, t] : init.entries()) {
    names.push_back(name);
    inputs.push_back(t.value());
  }

  // Freeze the regression target one unit away from the initial prediction
  // so the loss and its gradients are O(1) at the evaluation point.
  double y0;
  {
    PlainParamMap<double> pm = plain_view(init);
    NdArray pred = forward_plain<double>(inputs[0], cfg, pm);
    y0 = pred.data[0] - 1.0;
  }
  const NdArray target({1, 1}, {y0});
  const NdArrayLD target_ld = target.cast<long double>();

  AutogradFn fn = [&](const std::vector<Tensor>& leaves) {
    ParamStore store;
    for (size_t i = 1; i < leaves.size(); ++i) store.add(names[i], leaves[i]);
    Tensor pred = forward(leaves[0], cfg, store);
    return mse_loss(pred, Tensor(target));
  };
  PlainFn plain = [&](const std::vector<NdArray>& probe) {
    PlainParamMap<double> pm;
    for (size_t i = 1; i < probe.size(); ++i) pm[names[i]] = &probe[i];
    NdArray pred = forward_plain<double>(probe[0], cfg, pm);
    return fwd::mse<double>(pred, target);
  };
  PlainFnLD plain_ld = [&](const std::vector<NdArrayLD>& probe) {
    PlainParamMap<long double> pm;
    for (size_t i = 1; i < probe.size(); ++i) pm[names[i]] = &probe[i];
    NdArrayLD pred = forward_plain<long double>(probe[0], cfg, pm);
    return fwd::mse<long double>(pred, target_ld);
  };

  GradCheckOptions opts;
  opts.eps = eps;
  if (!corrupt_name.empty()) {
    opts.corrupt_scale = 2.0;
    opts.corrupt_input = -1;
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == corrupt_name) opts.corrupt_input = static_cast<int>(i);
    if (opts.corrupt_input < 0)
      throw ValueError(cat("unknown parameter '", corrupt_name, "' for gradient corruption"));
  }

  ModelGradCheck out;
  out.result = grad_check(fn, plain, plain_ld, inputs, opts);
  out.group_names = std::move(names);
  return out;
}

}  // namespace ycvt::model

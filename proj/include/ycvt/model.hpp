#pragma once

// Three-stage Convolutional vision Transformer adapted for single-output
// regression on multi-band histogram inputs.
//
// Each stage: convolutional token embedding (conv + flatten + layer norm),
// then depth x convolutional transformer blocks. Inside a block the query/
// key/value projections are depth-wise separable convolutions over the 2-D
// token map (depth-wise 3x3 + normalization + pointwise linear); key/value
// may use stride 2, quartering their token count on even map extents. A
// classification token joins at the final stage (pointwise path only, no
// spatial position) and feeds the regression head. No positional embeddings,
// no input augmentation.
//
// Two forward paths share one set of fwd:: operator definitions:
//   forward()        - autograd path used for training,
//   forward_plain<S> - graph-free template used for evaluation and as the
//                      independent function evaluator of the gradient check
//                      (S = double fast path, S = long double oracle refine).
// The two are bit-identical at S = double; tests pin that.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ycvt/fwd.hpp"
#include "ycvt/gradcheck.hpp"
#include "ycvt/ops.hpp"
#include "ycvt/tensor.hpp"

namespace ycvt::model {

// ------------------------------------------------------------- configuration

struct StageConfig {
  int64_t patch_kernel = 3;
  int64_t patch_stride = 2;
  int64_t patch_padding = 1;
  int64_t embed_dim = 64;
  int64_t num_heads = 1;
  int64_t depth = 1;
  double mlp_ratio = 4.0;
  int64_t q_stride = 1;
  int64_t kv_stride = 2;
  bool has_cls_token = false;
};

/// Normalization after the depth-wise projection conv. Layer norm over the
/// channel axis by default (batch-size independent); batch statistics as the
/// configurable alternative.
enum class ProjNorm : int { LayerNorm = 0, BatchNorm = 1 };

struct ModelConfig {
  int64_t input_channels = 11;
  int64_t input_height = 32;
  int64_t input_width = 34;
  std::vector<StageConfig> stages;
  std::optional<int64_t> head_hidden;
  int64_t output_dim = 1;
  ProjNorm proj_norm = ProjNorm::LayerNorm;

  void validate() const;
};

/// cvt13 | cvt21 | cvtw24 | tiny (tiny is a desk-scale test preset).
ModelConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

/// (h, w) token-map extents after each stage's embedding, from the conv
/// shape formula alone.
std::vector<std::pair<int64_t, int64_t>> stage_token_extents(const ModelConfig& cfg);

// ----------------------------------------------------------------- ParamStore

/// Ordered, uniquely named learnable tensors.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  size_t size() const { return entries_.size(); }
  int64_t total_params() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

/// Enumerates every parameter name/shape the config implies, in store order.
void for_each_param(const ModelConfig& cfg,
                    const std::function<void(const std::string&, const Shape&)>& fn);

/// Parameter count as a pure function of the config.
int64_t param_count(const ModelConfig& cfg);

/// Training init: truncated normal (sigma 0.02) projection/MLP/conv weights,
/// zero biases and cls token, ones/zeros norm affine. Deterministic in seed.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

/// Gradient-check init: fan-in-scaled weights and slightly randomized biases
/// and norm affines. Conditions the finite-difference oracle (keeps gradient
/// magnitudes well above the double-precision FD noise floor); never used
/// for training.
ParamStore init_params_gradcheck(const ModelConfig& cfg, uint64_t seed);

// ------------------------------------------------------------------ token map

struct TokenMap {
  Tensor tokens;  // [N, L, D]; L == h*w (+1 with cls token in front)
  int64_t h = 0;
  int64_t w = 0;
  bool has_cls = false;

  int64_t len() const { return tokens.shape()[1]; }
};

enum class ProjRole { Query, Key, Value };

// ------------------------------------------------------ forward (autograd)

TokenMap conv_token_embedding(const Tensor& x, int stage_idx, const StageConfig& stage,
                              const ParamStore& params);

/// Depth-wise separable projection of a token map; cls token bypasses the
/// spatial path and rejoins before the pointwise linear map.
TokenMap conv_projection(const TokenMap& t, int stage_idx, int block_idx, ProjRole role,
                         int64_t stride, const ParamStore& params, ProjNorm norm);

/// Scaled dot-product attention over split heads, before the output
/// projection. Exposed for its own invariants (convexity, permutation).
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, int64_t num_heads);

/// attention_core followed by the learned D->D output projection.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int64_t num_heads, const Tensor& out_w, const Tensor& out_b);

TokenMap cvt_block(const TokenMap& t, int stage_idx, int block_idx, const StageConfig& stage,
                   const ParamStore& params, ProjNorm norm);

struct StageTrace {
  int64_t h = 0, w = 0, tokens = 0;
  bool has_cls = false;
};

/// Full model: stages -> cls layer norm -> regression head -> [N, 1].
Tensor forward(const Tensor& x, const ModelConfig& cfg, const ParamStore& params,
               std::vector<StageTrace>* trace = nullptr);

// ------------------------------------------------------------- checkpoints

struct TrainedModel {
  ModelConfig cfg;
  ParamStore params;
  double target_mean = 0.0;
  double target_std = 1.0;
};

void save_checkpoint(const std::string& path, const TrainedModel& m);
TrainedModel load_checkpoint(const std::string& path);

/// Rounds every parameter through float32, the checkpoint payload precision.
/// Final metrics are computed on rounded params so a saved checkpoint
/// reproduces them exactly.
void round_params_f32(ParamStore& params);

// ------------------------------------------------------------ model gradcheck

struct ModelGradCheck {
  GradCheckResult result;
  std::vector<std::string> group_names;  // parallel to result.per_input_max
};

/// End-to-end finite-difference check of d(mse)/d(every parameter and the
/// input grid) on one random sample at 64-bit. corrupt_name, when set, scales
/// that parameter's analytic gradient by 2 (negative control).
ModelGradCheck run_model_gradcheck(const ModelConfig& cfg, uint64_t seed, double eps,
                                   const std::string& corrupt_name = "");

// ----------------------------------------------------- plain forward (eval)

template <class S>
using PlainParamMap = std::unordered_map<std::string, const NdArrayT<S>*>;

template <class S>
struct PlainTokenMap {
  NdArrayT<S> tokens;
  int64_t h = 0, w = 0;
  bool has_cls = false;
};

namespace detail {

template <class S>
const NdArrayT<S>& pp(const PlainParamMap<S>& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ValueError(cat("missing parameter '", name, "'"));
  return *it->second;
}

template <class S>
PlainTokenMap<S> plain_embedding(const NdArrayT<S>& x, int stage_idx,
                                 const StageConfig& stage, const PlainParamMap<S>& params) {
  const std::string base = cat("stage", stage_idx, ".embed.");
  fwd::Conv2dSpec spec;
  spec.stride_h = spec.stride_w = stage.patch_stride;
  spec.pad_h = spec.pad_w = stage.patch_padding;
  const NdArrayT<S>& wt = pp(params, base + "conv.weight");
  const NdArrayT<S>& bias = pp(params, base + "conv.bias");
  NdArrayT<S> y = fwd::conv2d<S>(x, wt, &bias, spec);
  const int64_t n = y.shape[0], d = y.shape[1], h = y.shape[2], w = y.shape[3];
  NdArrayT<S> tokens = fwd::permute<S>(y, {0, 2, 3, 1}).reshaped({n, h * w, d});
  tokens = fwd::layer_norm<S>(tokens, pp(params, base + "norm.gamma"),
                              pp(params, base + "norm.beta"), S(1e-5));
  return {std::move(tokens), h, w, false};
}

template <class S>
PlainTokenMap<S> plain_conv_projection(const PlainTokenMap<S>& t, int stage_idx,
                                       int block_idx, ProjRole role, int64_t stride,
                                       const PlainParamMap<S>& params, ProjNorm norm) {
  const char* role_name = role == ProjRole::Query ? "q" : role == ProjRole::Key ? "k" : "v";
  const std::string base = cat("stage", stage_idx, ".block", block_idx, ".attn.", role_name, ".");
  const int64_t n = t.tokens.shape[0], d = t.tokens.shape[2];

  NdArrayT<S> cls, spatial;
  if (t.has_cls) {
    cls = fwd::narrow<S>(t.tokens, 1, 0, 1);
    spatial = fwd::narrow<S>(t.tokens, 1, 1, t.tokens.shape[1] - 1);
  } else {
    spatial = t.tokens;
  }
  NdArrayT<S> img = fwd::permute<S>(spatial.reshaped({n, t.h, t.w, d}), {0, 3, 1, 2});
  fwd::Conv2dSpec spec;
  spec.stride_h = spec.stride_w = stride;
  spec.pad_h = spec.pad_w = 1;
  spec.groups = d;
  NdArrayT<S> conv = fwd::conv2d<S>(img, pp(params, base + "dw.weight"), nullptr, spec);
  const int64_t ho = conv.shape[2], wo = conv.shape[3];
  NdArrayT<S> flat = fwd::permute<S>(conv, {0, 2, 3, 1}).reshaped({n, ho * wo, d});
  if (norm == ProjNorm::LayerNorm) {
    flat = fwd::layer_norm<S>(flat, pp(params, base + "norm.gamma"),
                              pp(params, base + "norm.beta"), S(1e-5));
  } else {
    // Batch statistics per channel over every (sample, position).
    const int64_t slices = flat.numel() / d;
    std::vector<S> mean(static_cast<size_t>(d), S(0)), var(static_cast<size_t>(d), S(0));
    for (int64_t s = 0; s < slices; ++s)
      for (int64_t c = 0; c < d; ++c) mean[static_cast<size_t>(c)] += flat.data[static_cast<size_t>(s * d + c)];
    for (int64_t c = 0; c < d; ++c) mean[static_cast<size_t>(c)] /= S(slices);
    for (int64_t s = 0; s < slices; ++s)
      for (int64_t c = 0; c < d; ++c) {
        const S dev = flat.data[static_cast<size_t>(s * d + c)] - mean[static_cast<size_t>(c)];
        var[static_cast<size_t>(c)] += dev * dev;
      }
    const NdArrayT<S>& gm = pp(params, base + "norm.gamma");
    const NdArrayT<S>& bt = pp(params, base + "norm.beta");
    NdArrayT<S> normed(flat.shape);
    for (int64_t c = 0; c < d; ++c) var[static_cast<size_t>(c)] /= S(slices);
    for (int64_t s = 0; s < slices; ++s)
      for (int64_t c = 0; c < d; ++c) {
        const size_t ci = static_cast<size_t>(c);
        normed.data[static_cast<size_t>(s * d + c)] =
            (flat.data[static_cast<size_t>(s * d + c)] - mean[ci]) /
                std::sqrt(var[ci] + S(1e-5)) * gm.data[ci] +
            bt.data[ci];
      }
    flat = std::move(normed);
  }
  NdArrayT<S> joined;
  if (t.has_cls) {
    joined = fwd::concat<S>({&cls, &flat}, 1);
  } else {
    joined = std::move(flat);
  }
  NdArrayT<S> proj = fwd::add_bias<S>(fwd::matmul<S>(joined, pp(params, base + "proj.weight")),
                                      pp(params, base + "proj.bias"));
  return {std::move(proj), ho, wo, t.has_cls};
}

template <class S>
NdArrayT<S> plain_attention_core(const NdArrayT<S>& q, const NdArrayT<S>& k,
                                 const NdArrayT<S>& v, int64_t heads) {
  const int64_t n = q.shape[0], lq = q.shape[1], d = q.shape[2], lk = k.shape[1];
  const int64_t dh = d / heads;
  NdArrayT<S> qh = fwd::permute<S>(q.reshaped({n, lq, heads, dh}), {0, 2, 1, 3});
  NdArrayT<S> kh = fwd::permute<S>(k.reshaped({n, lk, heads, dh}), {0, 2, 3, 1});
  NdArrayT<S> vh = fwd::permute<S>(v.reshaped({n, lk, heads, dh}), {0, 2, 1, 3});
  NdArrayT<S> scores = fwd::scale<S>(fwd::matmul<S>(qh, kh),
                                     S(1) / std::sqrt(static_cast<S>(dh)));
  NdArrayT<S> attn = fwd::softmax_lastdim<S>(scores);
  NdArrayT<S> ctx = fwd::matmul<S>(attn, vh);
  return fwd::permute<S>(ctx, {0, 2, 1, 3}).reshaped({n, lq, d});
}

template <class S>
PlainTokenMap<S> plain_block(const PlainTokenMap<S>& t, int stage_idx, int block_idx,
                             const StageConfig& stage, const PlainParamMap<S>& params,
                             ProjNorm norm) {
  const std::string base = cat("stage", stage_idx, ".block", block_idx, ".");
  PlainTokenMap<S> ln1 = t;
  ln1.tokens = fwd::layer_norm<S>(t.tokens, pp(params, base + "norm1.gamma"),
                                  pp(params, base + "norm1.beta"), S(1e-5));
  PlainTokenMap<S> q = plain_conv_projection<S>(ln1, stage_idx, block_idx, ProjRole::Query,
                                                stage.q_stride, params, norm);
  PlainTokenMap<S> k = plain_conv_projection<S>(ln1, stage_idx, block_idx, ProjRole::Key,
                                                stage.kv_stride, params, norm);
  PlainTokenMap<S> v = plain_conv_projection<S>(ln1, stage_idx, block_idx, ProjRole::Value,
                                                stage.kv_stride, params, norm);
  NdArrayT<S> core = plain_attention_core<S>(q.tokens, k.tokens, v.tokens, stage.num_heads);
  NdArrayT<S> attn = fwd::add_bias<S>(fwd::matmul<S>(core, pp(params, base + "attn.out.weight")),
                                      pp(params, base + "attn.out.bias"));
  NdArrayT<S> x1 = fwd::add<S>(t.tokens, attn);
  NdArrayT<S> ln2 = fwd::layer_norm<S>(x1, pp(params, base + "norm2.gamma"),
                                       pp(params, base + "norm2.beta"), S(1e-5));
  NdArrayT<S> hidden = fwd::gelu<S>(fwd::add_bias<S>(
      fwd::matmul<S>(ln2, pp(params, base + "mlp.fc1.weight")), pp(params, base + "mlp.fc1.bias")));
  NdArrayT<S> mlp = fwd::add_bias<S>(fwd::matmul<S>(hidden, pp(params, base + "mlp.fc2.weight")),
                                     pp(params, base + "mlp.fc2.bias"));
  return {fwd::add<S>(x1, mlp), t.h, t.w, t.has_cls};
}

}  // namespace detail

template <class S>
NdArrayT<S> forward_plain(const NdArrayT<S>& x, const ModelConfig& cfg,
                          const PlainParamMap<S>& params) {
  using detail::pp;
  if (x.dim() != 4 || x.shape[1] != cfg.input_channels || x.shape[2] != cfg.input_height ||
      x.shape[3] != cfg.input_width)
    throw ShapeError(cat("model input must be [N,", cfg.input_channels, ",", cfg.input_height,
                         ",", cfg.input_width, "], got ", shape_str(x.shape)));
  NdArrayT<S> img = x;
  PlainTokenMap<S> tm;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const StageConfig& stage = cfg.stages[i];
    if (i > 0) {
      const int64_t n = tm.tokens.shape[0], d = tm.tokens.shape[2];
      img = fwd::permute<S>(tm.tokens.reshaped({n, tm.h, tm.w, d}), {0, 3, 1, 2});
    }
    tm = detail::plain_embedding<S>(img, static_cast<int>(i), stage, params);
    if (stage.has_cls_token) {
      const NdArrayT<S>& cls = pp(params, "cls_token");
      NdArrayT<S> tok = fwd::tile0<S>(cls.reshaped({1, 1, cls.numel()}), tm.tokens.shape[0]);
      tm.tokens = fwd::concat<S>({&tok, &tm.tokens}, 1);
      tm.has_cls = true;
    }
    for (int64_t b = 0; b < stage.depth; ++b)
      tm = detail::plain_block<S>(tm, static_cast<int>(i), static_cast<int>(b), stage, params,
                                  cfg.proj_norm);
  }
  const int64_t n = tm.tokens.shape[0], d = tm.tokens.shape[2];
  NdArrayT<S> cls = fwd::narrow<S>(tm.tokens, 1, 0, 1);
  cls = fwd::layer_norm<S>(cls, pp(params, "head.norm.gamma"), pp(params, "head.norm.beta"),
                           S(1e-5));
  NdArrayT<S> flat = cls.reshaped({n, d});
  if (cfg.head_hidden.has_value()) {
    NdArrayT<S> hidden = fwd::gelu<S>(fwd::add_bias<S>(
        fwd::matmul<S>(flat, pp(params, "head.fc1.weight")), pp(params, "head.fc1.bias")));
    return fwd::add_bias<S>(fwd::matmul<S>(hidden, pp(params, "head.fc2.weight")),
                            pp(params, "head.fc2.bias"));
  }
  return fwd::add_bias<S>(fwd::matmul<S>(flat, pp(params, "head.fc.weight")),
                          pp(params, "head.fc.bias"));
}

/// Name -> array map over a ParamStore's values (no copies).
PlainParamMap<double> plain_view(const ParamStore& params);

}  // namespace ycvt::model

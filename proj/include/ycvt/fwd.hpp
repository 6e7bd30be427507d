#pragma once

// Forward-only operator implementations on NdArrayT<S>. The autograd layer
// wraps these for S = double; the same templates instantiated at long double
// back the extended-precision finite-difference re-measurement in gradcheck,
// so there is exactly one definition of each operator's forward semantics.

#include <cmath>
#include <optional>

#include "ycvt/kernels.hpp"
#include "ycvt/nd.hpp"

namespace ycvt::fwd {

// Kernel resolution: double goes through the runtime-dispatched table,
// everything else through the scalar reference templates.
template <class S>
struct Kern {
  static void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
                      const S* a, const S* b, S* c) {
    kernels::gemm_nn_ref<S>(m, k, n, a, b, c);
  }
  static void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
                      const S* a, const S* g, S* c) {
    kernels::gemm_tn_ref<S>(m, k, n, a, g, c);
  }
  static void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
                      const S* g, const S* b, S* c) {
    kernels::gemm_nt_ref<S>(m, k, n, g, b, c);
  }
  static S vsum(const S* a, std::size_t n) { return kernels::vsum_ref<S>(a, n); }
  static S vmax(const S* a, std::size_t n) { return kernels::vmax_ref<S>(a, n); }
  static S dot(const S* a, const S* b, std::size_t n) { return kernels::dot_ref<S>(a, b, n); }
  static void axpy(S* y, S alpha, const S* x, std::size_t n) { kernels::axpy_ref<S>(y, alpha, x, n); }
  static void vadd(S* o, const S* a, const S* b, std::size_t n) { kernels::vadd_ref<S>(o, a, b, n); }
  static void vsub(S* o, const S* a, const S* b, std::size_t n) { kernels::vsub_ref<S>(o, a, b, n); }
  static void vmul(S* o, const S* a, const S* b, std::size_t n) { kernels::vmul_ref<S>(o, a, b, n); }
  static void vscale(S* o, const S* a, S alpha, std::size_t n) { kernels::vscale_ref<S>(o, a, alpha, n); }
};

template <>
struct Kern<double> {
  static void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
                      const double* a, const double* b, double* c) {
    kernels::active().gemm_nn(m, k, n, a, b, c);
  }
  static void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
                      const double* a, const double* g, double* c) {
    kernels::active().gemm_tn(m, k, n, a, g, c);
  }
  static void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
                      const double* g, const double* b, double* c) {
    kernels::active().gemm_nt(m, k, n, g, b, c);
  }
  static double vsum(const double* a, std::size_t n) { return kernels::active().vsum(a, n); }
  static double vmax(const double* a, std::size_t n) { return kernels::active().vmax(a, n); }
  static double dot(const double* a, const double* b, std::size_t n) {
    return kernels::active().dot(a, b, n);
  }
  static void axpy(double* y, double alpha, const double* x, std::size_t n) {
    kernels::active().axpy(y, alpha, x, n);
  }
  static void vadd(double* o, const double* a, const double* b, std::size_t n) {
    kernels::active().vadd(o, a, b, n);
  }
  static void vsub(double* o, const double* a, const double* b, std::size_t n) {
    kernels::active().vsub(o, a, b, n);
  }
  static void vmul(double* o, const double* a, const double* b, std::size_t n) {
    kernels::active().vmul(o, a, b, n);
  }
  static void vscale(double* o, const double* a, double alpha, std::size_t n) {
    kernels::active().vscale(o, a, alpha, n);
  }
};

// -------------------------------------------------------------- conv2d

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t pad, int64_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

struct Conv2dSpec {
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  int64_t groups = 1;
};

inline void check_conv2d(const Shape& x, const Shape& w, const Shape* bias,
                         const Conv2dSpec& spec) {
  if (x.size() != 4)
    throw ShapeError(cat("conv2d input must be rank 4 [N,C,H,W], got ", shape_str(x)));
  if (w.size() != 4)
    throw ShapeError(cat("conv2d weight must be rank 4 [Co,Ci/g,kH,kW], got ", shape_str(w)));
  const int64_t c_in = x[1], c_out = w[0], g = spec.groups;
  if (g <= 0) throw ShapeError("conv2d groups must be positive");
  if (c_in % g != 0)
    throw ShapeError(cat("conv2d input channels ", c_in, " not divisible by groups ", g));
  if (c_out % g != 0)
    throw ShapeError(cat("conv2d output channels ", c_out, " not divisible by groups ", g));
  if (w[1] != c_in / g)
    throw ShapeError(cat("conv2d weight channel dim ", w[1], " != C_in/groups = ", c_in / g));
  if (bias != nullptr && (bias->size() != 1 || (*bias)[0] != c_out))
    throw ShapeError(cat("conv2d bias must be [", c_out, "], got ", shape_str(*bias)));
  const int64_t ho = conv_out_extent(x[2], w[2], spec.pad_h, spec.stride_h);
  const int64_t wo = conv_out_extent(x[3], w[3], spec.pad_w, spec.stride_w);
  if (ho < 1 || wo < 1)
    throw ShapeError(cat("conv2d kernel ", w[2], "x", w[3], " does not fit padded input ",
                         x[2] + 2 * spec.pad_h, "x", x[3] + 2 * spec.pad_w));
}

/// Unpack one group of one image into a [Cg*kh*kw, Ho*Wo] patch matrix.
template <class S>
void im2col(const S* x, int64_t c_g, int64_t h, int64_t w, int64_t kh, int64_t kw,
            const Conv2dSpec& spec, int64_t ho, int64_t wo, S* col) {
  for (int64_t c = 0; c < c_g; ++c) {
    const S* xc = x + c * h * w;
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        S* row = col + ((c * kh + ki) * kw + kj) * (ho * wo);
        for (int64_t oi = 0; oi < ho; ++oi) {
          const int64_t ii = oi * spec.stride_h - spec.pad_h + ki;
          if (ii < 0 || ii >= h) {
            for (int64_t oj = 0; oj < wo; ++oj) row[oi * wo + oj] = S(0);
            continue;
          }
          for (int64_t oj = 0; oj < wo; ++oj) {
            const int64_t jj = oj * spec.stride_w - spec.pad_w + kj;
            row[oi * wo + oj] = (jj >= 0 && jj < w) ? xc[ii * w + jj] : S(0);
          }
        }
      }
    }
  }
}

/// Scatter-add of a patch matrix back into the (zero-initialised) image.
template <class S>
void col2im_add(const S* col, int64_t c_g, int64_t h, int64_t w, int64_t kh,
                int64_t kw, const Conv2dSpec& spec, int64_t ho, int64_t wo, S* x) {
  for (int64_t c = 0; c < c_g; ++c) {
    S* xc = x + c * h * w;
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const S* row = col + ((c * kh + ki) * kw + kj) * (ho * wo);
        for (int64_t oi = 0; oi < ho; ++oi) {
          const int64_t ii = oi * spec.stride_h - spec.pad_h + ki;
          if (ii < 0 || ii >= h) continue;
          for (int64_t oj = 0; oj < wo; ++oj) {
            const int64_t jj = oj * spec.stride_w - spec.pad_w + kj;
            if (jj >= 0 && jj < w) xc[ii * w + jj] += row[oi * wo + oj];
          }
        }
      }
    }
  }
}

/// Cross-correlation (no kernel flip), zero padding.
template <class S>
NdArrayT<S> conv2d(const NdArrayT<S>& x, const NdArrayT<S>& w,
                   const NdArrayT<S>* bias, const Conv2dSpec& spec) {
  check_conv2d(x.shape, w.shape, bias ? &bias->shape : nullptr, spec);
  const int64_t n = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const int64_t c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int64_t g = spec.groups, c_g = c_in / g, co_g = c_out / g;
  const int64_t ho = conv_out_extent(h, kh, spec.pad_h, spec.stride_h);
  const int64_t wo = conv_out_extent(wd, kw, spec.pad_w, spec.stride_w);

  NdArrayT<S> y({n, c_out, ho, wo});
  std::vector<S> col(static_cast<size_t>(c_g * kh * kw * ho * wo));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t gi = 0; gi < g; ++gi) {
      const S* xg = x.ptr() + (i * c_in + gi * c_g) * h * wd;
      im2col<S>(xg, c_g, h, wd, kh, kw, spec, ho, wo, col.data());
      S* yg = y.ptr() + (i * c_out + gi * co_g) * ho * wo;
      Kern<S>::gemm_nn(static_cast<size_t>(co_g), static_cast<size_t>(c_g * kh * kw),
                       static_cast<size_t>(ho * wo),
                       w.ptr() + gi * co_g * c_g * kh * kw, col.data(), yg);
    }
    if (bias != nullptr) {
      for (int64_t c = 0; c < c_out; ++c) {
        S* yc = y.ptr() + (i * c_out + c) * ho * wo;
        const S b = bias->data[static_cast<size_t>(c)];
        for (int64_t p = 0; p < ho * wo; ++p) yc[p] += b;
      }
    }
  }
  return y;
}

// -------------------------------------------------------------- matmul

inline void check_matmul(const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ShapeError(cat("matmul operands must be rank >= 2, got ", shape_str(a), " and ", shape_str(b)));
  if (a.back() != b[b.size() - 2])
    throw ShapeError(cat("matmul inner extents differ: ", shape_str(a), " x ", shape_str(b)));
  if (b.size() == 2) return;  // shared right operand, any leading batch on a
  if (a.size() != b.size())
    throw ShapeError(cat("matmul batch ranks differ: ", shape_str(a), " x ", shape_str(b)));
  for (size_t i = 0; i + 2 < a.size(); ++i)
    if (a[i] != b[i])
      throw ShapeError(cat("matmul batch extents differ at axis ", i, ": ", shape_str(a), " x ", shape_str(b)));
}

/// a[...,M,K] x b[K,N] (weight shared over leading dims) or a[B..,M,K] x b[B..,K,N].
template <class S>
NdArrayT<S> matmul(const NdArrayT<S>& a, const NdArrayT<S>& b) {
  check_matmul(a.shape, b.shape);
  const int64_t k = a.shape.back();
  const int64_t m = a.shape[a.shape.size() - 2];
  const int64_t n = b.shape.back();
  Shape out_shape(a.shape.begin(), a.shape.end() - 1);
  out_shape.push_back(n);
  NdArrayT<S> out(out_shape);
  if (b.dim() == 2) {
    // Collapse leading dims into rows: one gemm against the shared weight.
    const int64_t rows = a.numel() / k;
    Kern<S>::gemm_nn(static_cast<size_t>(rows), static_cast<size_t>(k),
                     static_cast<size_t>(n), a.ptr(), b.ptr(), out.ptr());
    return out;
  }
  const int64_t batch = a.numel() / (m * k);
  for (int64_t s = 0; s < batch; ++s) {
    Kern<S>::gemm_nn(static_cast<size_t>(m), static_cast<size_t>(k),
                     static_cast<size_t>(n), a.ptr() + s * m * k,
                     b.ptr() + s * k * n, out.ptr() + s * m * n);
  }
  return out;
}

// ---------------------------------------------------------- layer norm

inline void check_lastdim_params(const Shape& x, const Shape& p, const char* op,
                                 const char* pname) {
  if (x.empty()) throw ShapeError(cat(op, " input must have rank >= 1"));
  if (p.size() != 1 || p[0] != x.back())
    throw ShapeError(cat(op, " ", pname, " must be [", x.back(), "], got ", shape_str(p)));
}

/// Per-last-axis standardisation followed by the affine map. Optionally
/// writes the per-slice mean and reciprocal std for the backward pass.
template <class S>
NdArrayT<S> layer_norm(const NdArrayT<S>& x, const NdArrayT<S>& gamma,
                       const NdArrayT<S>& beta, S eps,
                       std::vector<S>* mean_out = nullptr,
                       std::vector<S>* rstd_out = nullptr) {
  check_lastdim_params(x.shape, gamma.shape, "layer_norm", "gamma");
  check_lastdim_params(x.shape, beta.shape, "layer_norm", "beta");
  if (!(eps > S(0))) throw ValueError("layer_norm eps must be > 0");
  const int64_t d = x.shape.back();
  const int64_t slices = x.numel() / d;
  NdArrayT<S> out(x.shape);
  if (mean_out) mean_out->resize(static_cast<size_t>(slices));
  if (rstd_out) rstd_out->resize(static_cast<size_t>(slices));
  for (int64_t s = 0; s < slices; ++s) {
    const S* xs = x.ptr() + s * d;
    S* os = out.ptr() + s * d;
    const S mu = Kern<S>::vsum(xs, static_cast<size_t>(d)) / S(d);
    S var = S(0);
    for (int64_t i = 0; i < d; ++i) {
      const S c = xs[i] - mu;
      var += c * c;
    }
    var /= S(d);
    const S rstd = S(1) / std::sqrt(var + eps);
    for (int64_t i = 0; i < d; ++i)
      os[i] = (xs[i] - mu) * rstd * gamma.data[static_cast<size_t>(i)] +
              beta.data[static_cast<size_t>(i)];
    if (mean_out) (*mean_out)[static_cast<size_t>(s)] = mu;
    if (rstd_out) (*rstd_out)[static_cast<size_t>(s)] = rstd;
  }
  return out;
}

// ------------------------------------------------------------- softmax

/// Numerically stable softmax over the last axis.
template <class S>
NdArrayT<S> softmax_lastdim(const NdArrayT<S>& x) {
  if (x.dim() < 1) throw ShapeError("softmax input must have rank >= 1");
  const int64_t d = x.shape.back();
  const int64_t slices = x.numel() / d;
  NdArrayT<S> out(x.shape);
  for (int64_t s = 0; s < slices; ++s) {
    const S* xs = x.ptr() + s * d;
    S* os = out.ptr() + s * d;
    const S m = Kern<S>::vmax(xs, static_cast<size_t>(d));
    S sum = S(0);
    for (int64_t i = 0; i < d; ++i) {
      os[i] = std::exp(xs[i] - m);
      sum += os[i];
    }
    const S inv = S(1) / sum;
    for (int64_t i = 0; i < d; ++i) os[i] *= inv;
  }
  return out;
}

// ---------------------------------------------------------------- gelu

// tanh approximation: 0.5 x (1 + tanh(k0 (x + c x^3)))
template <class S>
inline S gelu_scalar(S x) {
  const S k0 = S(0.7978845608028654);  // sqrt(2/pi)
  const S c = S(0.044715);
  return S(0.5) * x * (S(1) + std::tanh(k0 * (x + c * x * x * x)));
}

template <class S>
inline S gelu_grad_scalar(S x) {
  const S k0 = S(0.7978845608028654);
  const S c = S(0.044715);
  const S u = k0 * (x + c * x * x * x);
  const S t = std::tanh(u);
  const S du = k0 * (S(1) + S(3) * c * x * x);
  return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * du;
}

template <class S>
NdArrayT<S> gelu(const NdArrayT<S>& x) {
  NdArrayT<S> out(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) out.data[static_cast<size_t>(i)] = gelu_scalar<S>(x.data[static_cast<size_t>(i)]);
  return out;
}

// ------------------------------------------------------- simple elementwise

template <class S>
NdArrayT<S> add(const NdArrayT<S>& a, const NdArrayT<S>& b) {
  if (!same_shape(a.shape, b.shape))
    throw ShapeError(cat("add shapes differ: ", shape_str(a.shape), " vs ", shape_str(b.shape)));
  NdArrayT<S> out(a.shape);
  Kern<S>::vadd(out.ptr(), a.ptr(), b.ptr(), static_cast<size_t>(a.numel()));
  return out;
}

template <class S>
NdArrayT<S> sub(const NdArrayT<S>& a, const NdArrayT<S>& b) {
  if (!same_shape(a.shape, b.shape))
    throw ShapeError(cat("sub shapes differ: ", shape_str(a.shape), " vs ", shape_str(b.shape)));
  NdArrayT<S> out(a.shape);
  Kern<S>::vsub(out.ptr(), a.ptr(), b.ptr(), static_cast<size_t>(a.numel()));
  return out;
}

template <class S>
NdArrayT<S> mul(const NdArrayT<S>& a, const NdArrayT<S>& b) {
  if (!same_shape(a.shape, b.shape))
    throw ShapeError(cat("mul shapes differ: ", shape_str(a.shape), " vs ", shape_str(b.shape)));
  NdArrayT<S> out(a.shape);
  Kern<S>::vmul(out.ptr(), a.ptr(), b.ptr(), static_cast<size_t>(a.numel()));
  return out;
}

template <class S>
NdArrayT<S> scale(const NdArrayT<S>& a, S alpha) {
  NdArrayT<S> out(a.shape);
  Kern<S>::vscale(out.ptr(), a.ptr(), alpha, static_cast<size_t>(a.numel()));
  return out;
}

/// x[...,D] + b[D], bias broadcast over every leading index.
template <class S>
NdArrayT<S> add_bias(const NdArrayT<S>& x, const NdArrayT<S>& b) {
  check_lastdim_params(x.shape, b.shape, "add_bias", "bias");
  const int64_t d = x.shape.back();
  const int64_t slices = x.numel() / d;
  NdArrayT<S> out(x.shape);
  for (int64_t s = 0; s < slices; ++s)
    Kern<S>::vadd(out.ptr() + s * d, x.ptr() + s * d, b.ptr(), static_cast<size_t>(d));
  return out;
}

// ------------------------------------------------------- shape movement

template <class S>
NdArrayT<S> permute(const NdArrayT<S>& x, const std::vector<int>& perm) {
  const int r = x.dim();
  if (static_cast<int>(perm.size()) != r)
    throw ShapeError(cat("permute order has ", perm.size(), " axes for rank ", r));
  std::vector<bool> seen(static_cast<size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<size_t>(p)])
      throw ShapeError("permute order is not a permutation of the axes");
    seen[static_cast<size_t>(p)] = true;
  }
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = x.shape[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  NdArrayT<S> out(out_shape);

  std::vector<int64_t> in_strides(static_cast<size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i)
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i + 1)] * x.shape[static_cast<size_t>(i + 1)];
  std::vector<int64_t> src_stride(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) src_stride[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])];

  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t src = 0;
  const int64_t n = x.numel();
  for (int64_t flat = 0; flat < n; ++flat) {
    out.data[static_cast<size_t>(flat)] = x.data[static_cast<size_t>(src)];
    for (int axis = r - 1; axis >= 0; --axis) {
      idx[static_cast<size_t>(axis)]++;
      src += src_stride[static_cast<size_t>(axis)];
      if (idx[static_cast<size_t>(axis)] < out_shape[static_cast<size_t>(axis)]) break;
      src -= src_stride[static_cast<size_t>(axis)] * out_shape[static_cast<size_t>(axis)];
      idx[static_cast<size_t>(axis)] = 0;
    }
  }
  return out;
}

template <class S>
NdArrayT<S> narrow(const NdArrayT<S>& x, int axis, int64_t start, int64_t len) {
  const int r = x.dim();
  if (axis < 0 || axis >= r) throw ShapeError(cat("narrow axis ", axis, " out of range for rank ", r));
  const int64_t extent = x.shape[static_cast<size_t>(axis)];
  if (start < 0 || len < 1 || start + len > extent)
    throw ShapeError(cat("narrow [", start, ",", start + len, ") out of bounds for extent ", extent));
  Shape out_shape = x.shape;
  out_shape[static_cast<size_t>(axis)] = len;
  NdArrayT<S> out(out_shape);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= x.shape[static_cast<size_t>(i)];
  for (int64_t o = 0; o < outer; ++o) {
    const S* src = x.ptr() + (o * extent + start) * inner;
    S* dst = out.ptr() + o * len * inner;
    std::copy(src, src + len * inner, dst);
  }
  return out;
}

template <class S>
NdArrayT<S> concat(const std::vector<const NdArrayT<S>*>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat needs at least one operand");
  const int r = parts[0]->dim();
  if (axis < 0 || axis >= r) throw ShapeError(cat("concat axis ", axis, " out of range for rank ", r));
  int64_t total = 0;
  for (const auto* p : parts) {
    if (p->dim() != r) throw ShapeError("concat operands must share rank");
    for (int i = 0; i < r; ++i)
      if (i != axis && p->shape[static_cast<size_t>(i)] != parts[0]->shape[static_cast<size_t>(i)])
        throw ShapeError(cat("concat operand shape ", shape_str(p->shape), " mismatches ",
                             shape_str(parts[0]->shape), " off the concat axis"));
    total += p->shape[static_cast<size_t>(axis)];
  }
  Shape out_shape = parts[0]->shape;
  out_shape[static_cast<size_t>(axis)] = total;
  NdArrayT<S> out(out_shape);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[static_cast<size_t>(i)];
  for (int64_t o = 0; o < outer; ++o) {
    int64_t offset = 0;
    for (const auto* p : parts) {
      const int64_t ext = p->shape[static_cast<size_t>(axis)];
      const S* src = p->ptr() + o * ext * inner;
      S* dst = out.ptr() + (o * total + offset) * inner;
      std::copy(src, src + ext * inner, dst);
      offset += ext;
    }
  }
  return out;
}

/// Repeat a [1, ...] array n times along axis 0.
template <class S>
NdArrayT<S> tile0(const NdArrayT<S>& x, int64_t n) {
  if (x.dim() < 1 || x.shape[0] != 1)
    throw ShapeError(cat("tile0 expects leading extent 1, got ", shape_str(x.shape)));
  Shape out_shape = x.shape;
  out_shape[0] = n;
  NdArrayT<S> out(out_shape);
  const int64_t chunk = x.numel();
  for (int64_t i = 0; i < n; ++i)
    std::copy(x.ptr(), x.ptr() + chunk, out.ptr() + i * chunk);
  return out;
}

// ----------------------------------------------------------- reductions

template <class S>
S sum_all(const NdArrayT<S>& x) {
  return Kern<S>::vsum(x.ptr(), static_cast<size_t>(x.numel()));
}

template <class S>
S mean_all(const NdArrayT<S>& x) {
  return sum_all(x) / S(x.numel());
}

template <class S>
S mse(const NdArrayT<S>& pred, const NdArrayT<S>& target) {
  if (!same_shape(pred.shape, target.shape))
    throw ShapeError(cat("mse shapes differ: ", shape_str(pred.shape), " vs ", shape_str(target.shape)));
  if (pred.numel() < 1) throw ShapeError("mse needs at least one element");
  S acc = S(0);
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const S d = pred.data[static_cast<size_t>(i)] - target.data[static_cast<size_t>(i)];
    acc += d * d;
  }
  return acc / S(pred.numel());
}

}  // namespace ycvt::fwd

#include "ycvt/ops.hpp"

#include <cmath>

#include "ycvt/kernels.hpp"

namespace ycvt {

using autograd::accumulate;
using autograd::make_op_output;

namespace {
const kernels::Kernels& K() { return kernels::active(); }
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  NdArray out = fwd::add(a.value(), b.value());
  return make_op_output(std::move(out), "add", {a, b}, [a, b](const NdArray& g) {
    if (a.requires_grad()) accumulate(a.impl(), g);
    if (b.requires_grad()) accumulate(b.impl(), g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  NdArray out = fwd::sub(a.value(), b.value());
  return make_op_output(std::move(out), "sub", {a, b}, [a, b](const NdArray& g) {
    if (a.requires_grad()) accumulate(a.impl(), g);
    if (b.requires_grad()) accumulate(b.impl(), fwd::scale(g, -1.0));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  NdArray out = fwd::mul(a.value(), b.value());
  return make_op_output(std::move(out), "mul", {a, b}, [a, b](const NdArray& g) {
    if (a.requires_grad()) accumulate(a.impl(), fwd::mul(g, b.value()));
    if (b.requires_grad()) accumulate(b.impl(), fwd::mul(g, a.value()));
  });
}

Tensor scale(const Tensor& a, double alpha) {
  NdArray out = fwd::scale(a.value(), alpha);
  return make_op_output(std::move(out), "scale", {a}, [a, alpha](const NdArray& g) {
    if (a.requires_grad()) accumulate(a.impl(), fwd::scale(g, alpha));
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  NdArray out = fwd::add_bias(x.value(), bias.value());
  return make_op_output(std::move(out), "add_bias", {x, bias}, [x, bias](const NdArray& g) {
    if (x.requires_grad()) accumulate(x.impl(), g);
    if (bias.requires_grad()) {
      const int64_t d = bias.numel();
      const int64_t slices = g.numel() / d;
      NdArray db(bias.value().shape);
      for (int64_t s = 0; s < slices; ++s)
        K().axpy(db.ptr(), 1.0, g.ptr() + s * d, static_cast<size_t>(d));
      accumulate(bias.impl(), db);
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  NdArray out = fwd::matmul(a.value(), b.value());
  return make_op_output(std::move(out), "matmul", {a, b}, [a, b](const NdArray& g) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    const int64_t k = as.back();
    const int64_t m = as[as.size() - 2];
    const int64_t n = bs.back();
    if (b.dim() == 2) {
      const int64_t rows = a.numel() / k;
      if (a.requires_grad()) {
        NdArray da(as);
        K().gemm_nt(static_cast<size_t>(rows), static_cast<size_t>(k),
                    static_cast<size_t>(n), g.ptr(), b.value().ptr(), da.ptr());
        accumulate(a.impl(), da);
      }
      if (b.requires_grad()) {
        NdArray db(bs);
        K().gemm_tn(static_cast<size_t>(rows), static_cast<size_t>(k),
                    static_cast<size_t>(n), a.value().ptr(), g.ptr(), db.ptr());
        accumulate(b.impl(), db);
      }
      return;
    }
    const int64_t batch = a.numel() / (m * k);
    NdArray da(as), db(bs);
    for (int64_t s = 0; s < batch; ++s) {
      if (a.requires_grad())
        K().gemm_nt(static_cast<size_t>(m), static_cast<size_t>(k),
                    static_cast<size_t>(n), g.ptr() + s * m * n,
                    b.value().ptr() + s * k * n, da.ptr() + s * m * k);
      if (b.requires_grad())
        K().gemm_tn(static_cast<size_t>(m), static_cast<size_t>(k),
                    static_cast<size_t>(n), a.value().ptr() + s * m * k,
                    g.ptr() + s * m * n, db.ptr() + s * k * n);
    }
    if (a.requires_grad()) accumulate(a.impl(), da);
    if (b.requires_grad()) accumulate(b.impl(), db);
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
              const fwd::Conv2dSpec& spec) {
  const NdArray* bptr = bias ? &bias->value() : nullptr;
  NdArray out = fwd::conv2d(x.value(), w.value(), bptr, spec);

  std::vector<Tensor> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  std::optional<Tensor> bias_copy = bias;

  return make_op_output(std::move(out), "conv2d", std::move(inputs),
                        [x, w, bias_copy, spec](const NdArray& g) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    const int64_t n = xs[0], c_in = xs[1], h = xs[2], wd = xs[3];
    const int64_t c_out = ws[0], kh = ws[2], kw = ws[3];
    const int64_t grp = spec.groups, c_g = c_in / grp, co_g = c_out / grp;
    const int64_t ho = g.shape[2], wo = g.shape[3];
    const int64_t patch = c_g * kh * kw;

    if (bias_copy && bias_copy->requires_grad()) {
      NdArray db({c_out});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < c_out; ++c)
          db.data[static_cast<size_t>(c)] +=
              K().vsum(g.ptr() + (i * c_out + c) * ho * wo, static_cast<size_t>(ho * wo));
      accumulate(bias_copy->impl(), db);
    }

    const bool need_dx = x.requires_grad();
    const bool need_dw = w.requires_grad();
    if (!need_dx && !need_dw) return;

    NdArray dx, dw;
    if (need_dx) dx = NdArray(xs);
    if (need_dw) dw = NdArray(ws);
    std::vector<double> col(static_cast<size_t>(patch * ho * wo));
    std::vector<double> dcol(static_cast<size_t>(patch * ho * wo));
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t gi = 0; gi < grp; ++gi) {
        const double* gslice = g.ptr() + (i * c_out + gi * co_g) * ho * wo;
        if (need_dw) {
          // dW = g . col^T, with the patch matrix recomputed (cheaper than
          // keeping it alive from the forward pass).
          const double* xg = x.value().ptr() + (i * c_in + gi * c_g) * h * wd;
          fwd::im2col<double>(xg, c_g, h, wd, kh, kw, spec, ho, wo, col.data());
          K().gemm_nt(static_cast<size_t>(co_g), static_cast<size_t>(patch),
                      static_cast<size_t>(ho * wo), gslice, col.data(),
                      dw.ptr() + gi * co_g * patch);
        }
        if (need_dx) {
          std::fill(dcol.begin(), dcol.end(), 0.0);
          K().gemm_tn(static_cast<size_t>(co_g), static_cast<size_t>(patch),
                      static_cast<size_t>(ho * wo),
                      w.value().ptr() + gi * co_g * patch, gslice, dcol.data());
          fwd::col2im_add<double>(dcol.data(), c_g, h, wd, kh, kw, spec, ho, wo,
                                  dx.ptr() + (i * c_in + gi * c_g) * h * wd);
        }
      }
    }
    if (need_dx) accumulate(x.impl(), dx);
    if (need_dw) accumulate(w.impl(), dw);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  auto mean = std::make_shared<std::vector<double>>();
  auto rstd = std::make_shared<std::vector<double>>();
  NdArray out = fwd::layer_norm(x.value(), gamma.value(), beta.value(), eps,
                                mean.get(), rstd.get());
  return make_op_output(std::move(out), "layer_norm", {x, gamma, beta},
                        [x, gamma, beta, mean, rstd](const NdArray& g) {
    const int64_t d = x.shape().back();
    const int64_t slices = x.numel() / d;
    const double* xv = x.value().ptr();
    const double* gv = gamma.value().ptr();

    NdArray dx, dgamma, dbeta;
    const bool need_dx = x.requires_grad();
    const bool need_dg = gamma.requires_grad();
    const bool need_db = beta.requires_grad();
    if (need_dx) dx = NdArray(x.shape());
    if (need_dg) dgamma = NdArray(gamma.shape());
    if (need_db) dbeta = NdArray(beta.shape());

    std::vector<double> h(static_cast<size_t>(d));
    for (int64_t s = 0; s < slices; ++s) {
      const double mu = (*mean)[static_cast<size_t>(s)];
      const double rs = (*rstd)[static_cast<size_t>(s)];
      const double* xsl = xv + s * d;
      const double* gsl = g.ptr() + s * d;
      double hm = 0.0, hxm = 0.0;
      for (int64_t i = 0; i < d; ++i) {
        const double xhat = (xsl[i] - mu) * rs;
        h[static_cast<size_t>(i)] = gsl[i] * gv[i];
        hm += h[static_cast<size_t>(i)];
        hxm += h[static_cast<size_t>(i)] * xhat;
        if (need_dg) dgamma.data[static_cast<size_t>(i)] += gsl[i] * xhat;
        if (need_db) dbeta.data[static_cast<size_t>(i)] += gsl[i];
      }
      if (need_dx) {
        hm /= static_cast<double>(d);
        hxm /= static_cast<double>(d);
        double* dxs = dx.ptr() + s * d;
        for (int64_t i = 0; i < d; ++i) {
          const double xhat = (xsl[i] - mu) * rs;
          dxs[i] = rs * (h[static_cast<size_t>(i)] - hm - xhat * hxm);
        }
      }
    }
    if (need_dx) accumulate(x.impl(), dx);
    if (need_dg) accumulate(gamma.impl(), dgamma);
    if (need_db) accumulate(beta.impl(), dbeta);
  });
}

Tensor channel_norm_batch(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          double eps) {
  // Statistics per trailing-axis channel across every other index. Implemented
  // by permuting the channel axis last-to-first conceptually: since the
  // channel is already the last axis, each channel's entries are strided.
  fwd::check_lastdim_params(x.shape(), gamma.shape(), "channel_norm_batch", "gamma");
  fwd::check_lastdim_params(x.shape(), beta.shape(), "channel_norm_batch", "beta");
  const int64_t d = x.shape().back();
  const int64_t slices = x.numel() / d;
  const double inv_n = 1.0 / static_cast<double>(slices);

  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(d), 0.0);
  auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(d), 0.0);
  const double* xv = x.value().ptr();
  for (int64_t s = 0; s < slices; ++s)
    for (int64_t c = 0; c < d; ++c) (*mean)[static_cast<size_t>(c)] += xv[s * d + c];
  for (int64_t c = 0; c < d; ++c) (*mean)[static_cast<size_t>(c)] *= inv_n;
  for (int64_t s = 0; s < slices; ++s)
    for (int64_t c = 0; c < d; ++c) {
      const double cdev = xv[s * d + c] - (*mean)[static_cast<size_t>(c)];
      (*rstd)[static_cast<size_t>(c)] += cdev * cdev;
    }
  for (int64_t c = 0; c < d; ++c)
    (*rstd)[static_cast<size_t>(c)] = 1.0 / std::sqrt((*rstd)[static_cast<size_t>(c)] * inv_n + eps);

  NdArray out(x.shape());
  for (int64_t s = 0; s < slices; ++s)
    for (int64_t c = 0; c < d; ++c) {
      const size_t ci = static_cast<size_t>(c);
      out.data[static_cast<size_t>(s * d + c)] =
          (xv[s * d + c] - (*mean)[ci]) * (*rstd)[ci] * gamma.value().data[ci] +
          beta.value().data[ci];
    }

  return make_op_output(std::move(out), "channel_norm_batch", {x, gamma, beta},
                        [x, gamma, beta, mean, rstd, slices, d, inv_n](const NdArray& g) {
    const double* xv = x.value().ptr();
    const double* gv = gamma.value().ptr();
    const bool need_dx = x.requires_grad();
    const bool need_dg = gamma.requires_grad();
    const bool need_db = beta.requires_grad();
    NdArray dx, dgamma, dbeta;
    if (need_dx) dx = NdArray(x.shape());
    if (need_dg) dgamma = NdArray(gamma.shape());
    if (need_db) dbeta = NdArray(beta.shape());

    std::vector<double> hm(static_cast<size_t>(d), 0.0), hxm(static_cast<size_t>(d), 0.0);
    for (int64_t s = 0; s < slices; ++s)
      for (int64_t c = 0; c < d; ++c) {
        const size_t ci = static_cast<size_t>(c);
        const double xhat = (xv[s * d + c] - (*mean)[ci]) * (*rstd)[ci];
        const double gval = g.data[static_cast<size_t>(s * d + c)];
        hm[ci] += gval * gv[c];
        hxm[ci] += gval * gv[c] * xhat;
        if (need_dg) dgamma.data[ci] += gval * xhat;
        if (need_db) dbeta.data[ci] += gval;
      }
    if (need_dx) {
      for (int64_t c = 0; c < d; ++c) {
        hm[static_cast<size_t>(c)] *= inv_n;
        hxm[static_cast<size_t>(c)] *= inv_n;
      }
      for (int64_t s = 0; s < slices; ++s)
        for (int64_t c = 0; c < d; ++c) {
          const size_t ci = static_cast<size_t>(c);
          const double xhat = (xv[s * d + c] - (*mean)[ci]) * (*rstd)[ci];
          const double gval = g.data[static_cast<size_t>(s * d + c)] * gv[c];
          dx.data[static_cast<size_t>(s * d + c)] =
              (*rstd)[ci] * (gval - hm[ci] - xhat * hxm[ci]);
        }
      accumulate(x.impl(), dx);
    }
    if (need_dg) accumulate(gamma.impl(), dgamma);
    if (need_db) accumulate(beta.impl(), dbeta);
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  NdArray out = fwd::softmax_lastdim(x.value());
  auto saved = std::make_shared<NdArray>(out);
  return make_op_output(std::move(out), "softmax", {x}, [x, saved](const NdArray& g) {
    if (!x.requires_grad()) return;
    const int64_t d = x.shape().back();
    const int64_t slices = x.numel() / d;
    NdArray dx(x.shape());
    for (int64_t s = 0; s < slices; ++s) {
      const double* sv = saved->ptr() + s * d;
      const double* gv = g.ptr() + s * d;
      const double dotgs = K().dot(gv, sv, static_cast<size_t>(d));
      double* dxs = dx.ptr() + s * d;
      for (int64_t i = 0; i < d; ++i) dxs[i] = sv[i] * (gv[i] - dotgs);
    }
    accumulate(x.impl(), dx);
  });
}

Tensor gelu(const Tensor& x) {
  NdArray out = fwd::gelu(x.value());
  return make_op_output(std::move(out), "gelu", {x}, [x](const NdArray& g) {
    if (!x.requires_grad()) return;
    NdArray dx(x.shape());
    const double* xv = x.value().ptr();
    for (int64_t i = 0; i < x.numel(); ++i)
      dx.data[static_cast<size_t>(i)] =
          g.data[static_cast<size_t>(i)] * fwd::gelu_grad_scalar<double>(xv[i]);
    accumulate(x.impl(), dx);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  NdArray out = x.value().reshaped(std::move(shape));
  return make_op_output(std::move(out), "reshape", {x}, [x](const NdArray& g) {
    if (x.requires_grad()) accumulate(x.impl(), g.reshaped(x.shape()));
  });
}

Tensor permute(const Tensor& x, std::vector<int> perm) {
  NdArray out = fwd::permute(x.value(), perm);
  return make_op_output(std::move(out), "permute", {x},
                        [x, perm = std::move(perm)](const NdArray& g) {
    if (!x.requires_grad()) return;
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int>(i);
    accumulate(x.impl(), fwd::permute(g, inv));
  });
}

Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t len) {
  NdArray out = fwd::narrow(x.value(), axis, start, len);
  return make_op_output(std::move(out), "narrow", {x},
                        [x, axis, start, len](const NdArray& g) {
    if (!x.requires_grad()) return;
    NdArray dx(x.shape());
    const int r = x.dim();
    const int64_t extent = x.shape()[static_cast<size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape()[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= x.shape()[static_cast<size_t>(i)];
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = g.ptr() + o * len * inner;
      double* dst = dx.ptr() + (o * extent + start) * inner;
      std::copy(src, src + len * inner, dst);
    }
    accumulate(x.impl(), dx);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  std::vector<const NdArray*> views;
  views.reserve(parts.size());
  for (const Tensor& t : parts) views.push_back(&t.value());
  NdArray out = fwd::concat(views, axis);
  return make_op_output(std::move(out), "concat", parts, [parts, axis](const NdArray& g) {
    int64_t offset = 0;
    for (const Tensor& p : parts) {
      const int64_t ext = p.shape()[static_cast<size_t>(axis)];
      if (p.requires_grad()) accumulate(p.impl(), fwd::narrow(g, axis, offset, ext));
      offset += ext;
    }
  });
}

Tensor tile0(const Tensor& x, int64_t n) {
  NdArray out = fwd::tile0(x.value(), n);
  return make_op_output(std::move(out), "tile0", {x}, [x, n](const NdArray& g) {
    if (!x.requires_grad()) return;
    NdArray dx(x.shape());
    const int64_t chunk = x.numel();
    for (int64_t i = 0; i < n; ++i)
      K().axpy(dx.ptr(), 1.0, g.ptr() + i * chunk, static_cast<size_t>(chunk));
    accumulate(x.impl(), dx);
  });
}

Tensor sum_all(const Tensor& x) {
  NdArray out({1}, {fwd::sum_all(x.value())});
  return make_op_output(std::move(out), "sum_all", {x}, [x](const NdArray& g) {
    if (x.requires_grad()) accumulate(x.impl(), NdArray::full(x.shape(), g.data[0]));
  });
}

Tensor mean_all(const Tensor& x) {
  NdArray out({1}, {fwd::mean_all(x.value())});
  return make_op_output(std::move(out), "mean_all", {x}, [x](const NdArray& g) {
    if (x.requires_grad())
      accumulate(x.impl(), NdArray::full(x.shape(), g.data[0] / static_cast<double>(x.numel())));
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  NdArray out({1}, {fwd::mse(pred.value(), target.value())});
  return make_op_output(std::move(out), "mse_loss", {pred, target},
                        [pred, target](const NdArray& g) {
    const double c = 2.0 * g.data[0] / static_cast<double>(pred.numel());
    if (pred.requires_grad()) {
      NdArray diff = fwd::sub(pred.value(), target.value());
      accumulate(pred.impl(), fwd::scale(diff, c));
    }
    if (target.requires_grad()) {
      NdArray diff = fwd::sub(target.value(), pred.value());
      accumulate(target.impl(), fwd::scale(diff, c));
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add_bias(matmul(x, w), bias);
}

}  // namespace ycvt

#pragma once

// Differentiable operators. Forward semantics live in ycvt::fwd (shared with
// the plain evaluator); each function here wraps the forward result with its
// vector-Jacobian closure.

#include <optional>
#include <vector>

#include "ycvt/fwd.hpp"
#include "ycvt/tensor.hpp"

namespace ycvt {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double alpha);

/// x[...,D] + bias[D] broadcast over all leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// a[...,M,K] x b[K,N] (b shared across leading dims) or equal-batch matmul.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation with zero padding; groups == C gives the depth-wise case.
Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
              const fwd::Conv2dSpec& spec);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Normalisation over all axes except the trailing channel axis (batch-norm
/// style statistics, no running averages).
Tensor channel_norm_batch(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          double eps = 1e-5);

Tensor softmax_lastdim(const Tensor& x);
Tensor gelu(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::vector<int> perm);
Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Repeat a [1,...] tensor n times along axis 0; gradient sums back.
Tensor tile0(const Tensor& x, int64_t n);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// Mean of squared differences; the usual regression loss.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// matmul + bias.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

}  // namespace ycvt

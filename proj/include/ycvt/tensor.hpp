#pragma once

// Reverse-mode automatic differentiation over dense double arrays.
//
// Every operator records a Node holding its input tensors and a backward
// closure; the recorded DAG (creation-ordered by a monotonic sequence id)
// is the execution graph. backward() walks the graph from a scalar output
// in reverse creation order, visiting each node exactly once and
// accumulating gradients additively into requires-grad leaves. Leaf
// gradients persist across backward calls, so a second backward over the
// same graph doubles them; call zero_grad() to reset.
//
// Tensors are immutable after construction except for gradient accumulation
// and the optimizer's explicit mutable_value() hook. A graph and its tensors
// belong to one thread; distinct graphs on distinct threads are safe.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ycvt/nd.hpp"

namespace ycvt {

class Tensor;

namespace autograd {

struct Node {
  const char* op_name = "";
  std::vector<Tensor> inputs;
  // Receives the output gradient and accumulates into the inputs' grads.
  std::function<void(const NdArray&)> backward;
};

bool grad_enabled();

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace autograd

struct TensorImpl {
  NdArray value;
  bool requires_grad = false;
  NdArray grad;  // empty until the first accumulation
  std::shared_ptr<autograd::Node> grad_fn;
  uint64_t seq = 0;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NdArray value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  /// Validates that every entry is finite (NaN/Inf violates the data contract).
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->value.shape; }
  int dim() const { return impl_->value.dim(); }
  int64_t numel() const { return impl_->value.numel(); }
  const NdArray& value() const { return impl_->value; }
  /// Direct mutation hook for the optimizer; any previously recorded graph
  /// referencing this tensor becomes stale.
  NdArray& mutable_value() { return impl_->value; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->grad_fn == nullptr; }
  bool has_grad() const { return !impl_->grad.data.empty(); }
  const NdArray& grad() const;
  void zero_grad();

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

namespace autograd {

/// Builds an op output: wraps the forward result, attaches a Node when
/// recording is on and some input requires grad.
Tensor make_op_output(NdArray value, const char* op_name, std::vector<Tensor> inputs,
                      std::function<void(const NdArray&)> backward);

/// Adds g into the tensor's grad slot (allocating zeros on first touch).
void accumulate(const std::shared_ptr<TensorImpl>& impl, const NdArray& g);

/// Reverse sweep from a scalar output. Errors: non-scalar output, or an
/// output detached from any recorded operation.
void backward(const Tensor& scalar_output);

}  // namespace autograd

}  // namespace ycvt

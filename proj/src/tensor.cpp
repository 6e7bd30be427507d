#include "ycvt/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "ycvt/kernels.hpp"

namespace ycvt {

namespace {
std::atomic<uint64_t> g_seq{1};
thread_local bool t_grad_enabled = true;
}  // namespace

namespace autograd {

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

}  // namespace autograd

Tensor::Tensor(NdArray value, bool requires_grad) {
  impl_ = std::make_shared<TensorImpl>();
  impl_->value = std::move(value);
  impl_->requires_grad = requires_grad;
  impl_->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(NdArray(std::move(shape)), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  return Tensor(NdArray::full(std::move(shape), v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(NdArray({1}, {v}), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  NdArray arr(std::move(shape), std::move(data));
  if (!arr.all_finite())
    throw ValueError("tensor data contains NaN/Inf (finite-value contract violated)");
  return Tensor(std::move(arr), requires_grad);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError(cat("item() requires a scalar tensor, shape is ", shape_str(shape())));
  return impl_->value.data[0];
}

const NdArray& Tensor::grad() const {
  if (!has_grad())
    throw ValueError("tensor has no gradient (backward not run or not a requires_grad path)");
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad = NdArray(); }

namespace autograd {

Tensor make_op_output(NdArray value, const char* op_name, std::vector<Tensor> inputs,
                      std::function<void(const NdArray&)> backward) {
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs)
      if (t.requires_grad()) {
        needs_grad = true;
        break;
      }
  }
  Tensor out(std::move(value), needs_grad);
  if (needs_grad) {
    auto node = std::make_shared<Node>();
    node->op_name = op_name;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl()->grad_fn = std::move(node);
  }
  return out;
}

void accumulate(const std::shared_ptr<TensorImpl>& impl, const NdArray& g) {
  if (!same_shape(impl->value.shape, g.shape))
    throw ShapeError(cat("gradient shape ", shape_str(g.shape), " mismatches value shape ",
                         shape_str(impl->value.shape)));
  if (impl->grad.data.empty()) {
    impl->grad = g;
  } else {
    kernels::active().axpy(impl->grad.ptr(), 1.0, g.ptr(),
                           static_cast<size_t>(g.numel()));
  }
}

void backward(const Tensor& scalar_output) {
  if (!scalar_output.defined()) throw ValueError("backward: undefined tensor");
  if (scalar_output.numel() != 1)
    throw ShapeError(cat("backward requires a scalar output, shape is ",
                         shape_str(scalar_output.shape())));
  if (scalar_output.impl()->grad_fn == nullptr)
    throw ValueError("backward: output is detached from any recorded graph");

  // Collect the cone of influence. Only requires-grad inputs are traversed;
  // everything else contributes no gradient.
  std::vector<std::shared_ptr<TensorImpl>> reachable;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::shared_ptr<TensorImpl>> stack{scalar_output.impl()};
  seen.insert(scalar_output.impl().get());
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    reachable.push_back(cur);
    if (cur->grad_fn == nullptr) continue;
    for (const Tensor& in : cur->grad_fn->inputs) {
      if (!in.requires_grad()) continue;
      if (seen.insert(in.impl().get()).second) stack.push_back(in.impl());
    }
  }

  // Intermediate (non-leaf) grads are scratch for this sweep; leaf grads
  // persist so repeated backward accumulates.
  for (auto& impl : reachable)
    if (impl->grad_fn != nullptr) impl->grad = NdArray();

  scalar_output.impl()->grad = NdArray::full({1}, 1.0);

  std::sort(reachable.begin(), reachable.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  for (auto& impl : reachable) {
    if (impl->grad_fn == nullptr) continue;
    if (impl->grad.data.empty()) continue;  // no gradient flowed here
    impl->grad_fn->backward(impl->grad);
  }
}

}  // namespace autograd

}  // namespace ycvt

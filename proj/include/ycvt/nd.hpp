#pragma once

// Dense row-major N-dimensional array of a single scalar type. This is the
// storage layer shared by the autograd engine (S = double) and the plain
// forward evaluator, which is also instantiated at long double so the
// finite-difference oracle can re-measure borderline entries at extended
// precision.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ycvt/common.hpp"

namespace ycvt {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError(cat("non-positive extent in shape ", shape_str(shape)));
    n *= d;
  }
  return n;
}

template <class S>
struct NdArrayT {
  Shape shape;
  std::vector<S> data;

  NdArrayT() = default;
  explicit NdArrayT(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), S(0)) {}
  NdArrayT(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw ShapeError(cat("data length ", data.size(), " does not match shape ", shape_str(shape)));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int dim() const { return static_cast<int>(shape.size()); }
  int64_t extent(int axis) const { return shape[static_cast<size_t>(axis)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// Same storage reinterpreted under a new shape; element count must match.
  NdArrayT reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw ShapeError(cat("reshape ", shape_str(shape), " -> ", shape_str(s), " changes element count"));
    NdArrayT out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  template <class T>
  NdArrayT<T> cast() const {
    NdArrayT<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }

  static NdArrayT full(Shape s, S value) {
    NdArrayT out(std::move(s));
    for (auto& v : out.data) v = value;
    return out;
  }
};

using NdArray = NdArrayT<double>;
using NdArrayLD = NdArrayT<long double>;

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace ycvt

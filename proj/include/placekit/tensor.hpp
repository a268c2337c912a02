#pragma once

#include <cstddef>
#include <vector>

#include "placekit/errors.hpp"

namespace placekit {

// Dense row-major value grid. Image-like tensors use (h, w, c) with the
// channel index fastest; token matrices use (n, d).
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int e : shape) n *= std::size_t(e);
    data.assign(n, T(0));
  }

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[std::size_t(i)]; }
  int ndim() const { return int(shape.size()); }

  T& operator()(int i) { return data[std::size_t(i)]; }
  const T& operator()(int i) const { return data[std::size_t(i)]; }
  T& operator()(int i, int j) { return data[std::size_t(i) * dim(1) + j]; }
  const T& operator()(int i, int j) const {
    return data[std::size_t(i) * dim(1) + j];
  }
  T& operator()(int i, int j, int k) {
    return data[(std::size_t(i) * dim(1) + j) * dim(2) + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data[(std::size_t(i) * dim(1) + j) * dim(2) + k];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  // Shape change with identity data layout (gradient is also identity).
  TensorT reshaped(std::vector<int> s) const {
    std::size_t n = 1;
    for (int e : s) n *= std::size_t(e);
    if (n != numel()) throw ShapeMismatch("reshape: element count changed");
    TensorT out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& x) {
  TensorT<To> out(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = To(x.data[i]);
  return out;
}

}  // namespace placekit

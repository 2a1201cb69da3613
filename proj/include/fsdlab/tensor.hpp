#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fsdlab/common.hpp"
#include "fsdlab/rng.hpp"

namespace fsdlab {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline std::size_t checked_numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) {
    if (e < 1) throw ShapeError("tensor extent must be >= 1, got shape " + shape_str(s));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

// Dense row-major n-d array. Activations use NHWC order; convolution kernels
// use (kh, kw, in_channels, out_channels).
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)), data(checked_numel(shape)) {}
  TensorT(Shape s, T fill) : shape(std::move(s)), data(checked_numel(shape), fill) {}

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  T& at(int a, int b, int c, int d) {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  const T& at(int a, int b, int c, int d) const {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  T& at(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  const T& at(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  T& at(int a, int b) { return data[static_cast<std::size_t>(a) * shape[1] + b]; }
  const T& at(int a, int b) const { return data[static_cast<std::size_t>(a) * shape[1] + b]; }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

template <typename T>
TensorT<T> zeros(Shape s) {
  return TensorT<T>(std::move(s), T(0));
}

template <typename T>
TensorT<T> full(Shape s, T v) {
  return TensorT<T>(std::move(s), v);
}

template <typename T>
TensorT<T> randn(Shape s, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  TensorT<T> out(std::move(s));
  for (auto& x : out.data) x = static_cast<T>(rng.normal(mean, stddev));
  return out;
}

template <typename T>
TensorT<T> rand_uniform(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  TensorT<T> out(std::move(s));
  for (auto& x : out.data) x = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

}  // namespace fsdlab

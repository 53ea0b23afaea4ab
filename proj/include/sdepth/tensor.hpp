#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sdepth/errors.hpp"

namespace sdepth {

// Dense row-major n-d array. Carrier for images, features and depth maps.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel() != static_cast<int64_t>(data.size()))
      throw DimensionError("tensor: shape/data size mismatch");
  }

  static Tensor zeros(std::vector<int> s) {
    int64_t n = count(s);
    return Tensor(std::move(s), std::vector<T>(static_cast<size_t>(n), T(0)));
  }

  static Tensor full(std::vector<int> s, T v) {
    int64_t n = count(s);
    return Tensor(std::move(s), std::vector<T>(static_cast<size_t>(n), v));
  }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw DimensionError("tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return count(shape); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int size(int i) const { return shape[static_cast<size_t>(i)]; }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 2-d / 3-d / 4-d accessors (row-major).
  T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
  T& at(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& at(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  T& at(int i, int j, int k, int l) {
    return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * static_cast<size_t>(shape[3]) + l];
  }
  const T& at(int i, int j, int k, int l) const {
    return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * static_cast<size_t>(shape[3]) + l];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }
};

template <typename T>
void require_finite(const Tensor<T>& t, const char* where) {
  if (!t.all_finite())
    throw NumericError(std::string(where) + ": tensor contains NaN/Inf");
}

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<int>& s, const char* where) {
  if (t.shape != s)
    throw DimensionError(std::string(where) + ": expected shape, got " + t.shape_str());
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;
using Mask = Tensor<uint8_t>;

}  // namespace sdepth

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexfuse {

// Dense row-major tensor of doubles. Rank 1 and rank 2 cover everything the
// model needs; gradients and finite-difference checks require 64-bit math.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
      throw std::invalid_argument("Tensor: data length does not match shape");
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) {
      if (e <= 0) throw std::invalid_argument("Tensor: extents must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  static Tensor vector(std::vector<double> d) {
    const int n = static_cast<int>(d.size());
    return Tensor({n}, std::move(d));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  int rows() const {
    if (rank() != 2) throw std::logic_error("Tensor: rows() on non-matrix");
    return shape[0];
  }
  int cols() const {
    if (rank() != 2) throw std::logic_error("Tensor: cols() on non-matrix");
    return shape[1];
  }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline double l2_norm_squared(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return s;
}

// Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)); biases stay zero and
// are filled by the caller where a nonzero init is wanted (forget gates).
inline void glorot_fill(Tensor& t, std::mt19937_64& rng) {
  int fan_in = 0;
  int fan_out = 0;
  if (t.rank() == 2) {
    fan_out = t.shape[0];
    fan_in = t.shape[1];
  } else {
    fan_in = static_cast<int>(t.numel());
    fan_out = 1;
  }
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  for (double& v : t.data) v = dist(rng);
}

}  // namespace lexfuse

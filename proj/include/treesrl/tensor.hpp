#ifndef TREESRL_TENSOR_HPP
#define TREESRL_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "treesrl/common.hpp"

namespace treesrl {

using Vec = std::vector<double>;

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  Vec v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(numel_of(shape), 0.0);
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return v.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double* row(std::size_t r) { return v.data() + r * cols(); }
  const double* row(std::size_t r) const { return v.data() + r * cols(); }

  // For 3-d tensors: pointer to slice [i, :, :].
  double* slice(std::size_t i) { return v.data() + i * shape.at(1) * shape.at(2); }
  const double* slice(std::size_t i) const { return v.data() + i * shape.at(1) * shape.at(2); }

  Tensor zeros_like() const { return Tensor(shape); }
  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// y += W x for W [out, in]
inline void gemv(const double* W, std::size_t out, std::size_t in, const double* x, double* y) {
  for (std::size_t r = 0; r < out; ++r) {
    const double* w = W + r * in;
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
}

// dx += W^T dy for W [out, in]
inline void gemv_t(const double* W, std::size_t out, std::size_t in, const double* dy,
                   double* dx) {
  for (std::size_t r = 0; r < out; ++r) {
    const double* w = W + r * in;
    const double g = dy[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < in; ++c) dx[c] += w[c] * g;
  }
}

// dW += dy x^T for dW [out, in]
inline void ger(double* dW, std::size_t out, std::size_t in, const double* dy, const double* x) {
  for (std::size_t r = 0; r < out; ++r) {
    double* w = dW + r * in;
    const double g = dy[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < in; ++c) w[c] += g * x[c];
  }
}

inline void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void check_finite(const Vec& v, const std::string& what) {
  for (double x : v)
    if (!std::isfinite(x)) throw numeric_error("non-finite value in " + what);
}

inline void check_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw numeric_error("non-finite value in " + what);
}

}  // namespace treesrl

#endif

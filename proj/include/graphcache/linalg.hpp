#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "graphcache/common.hpp"
#include "graphcache/rng.hpp"

namespace graphcache {

using Vec = std::vector<double>;

// Dense row-major matrix. All model math runs in 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return a[r * cols + c];
  }

  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (auto& x : a) x = rng.uniform(lo, hi);
  }

  bool operator==(const Matrix& o) const = default;
};

inline Vec matvec(const Matrix& m, std::span<const double> x) {
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// y = m^T x
inline Vec matvec_t(const Matrix& m, std::span<const double> x) {
  Vec y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
  }
  return y;
}

// m += u v^T
inline void add_outer(Matrix& m, std::span<const double> u,
                      std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += u[r] * v[c];
  }
}

// y += alpha * x
inline void axpy(Vec& y, double alpha, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    m = std::max(m, std::abs(a.a[i] - b.a[i]));
  return m;
}

}  // namespace graphcache

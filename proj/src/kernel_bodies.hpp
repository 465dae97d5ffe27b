#pragma once

// Per-element bodies shared by the serial and OpenMP kernels. Keeping one
// definition guarantees both paths accumulate in the same order.

#include "eqreg/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>

namespace eqreg::kernels::detail {

inline double conv_pixel(ImageShape s, std::span<const double> h, Index k,
                         std::span<const double> x, Index i, Index j) {
  const Index c = k / 2;
  double acc = 0.0;
  for (Index a = 0; a < k; ++a) {
    const Index r = i + c - a;
    if (r < 0 || r >= s.rows) continue;
    for (Index b = 0; b < k; ++b) {
      const Index q = j + c - b;
      if (q < 0 || q >= s.cols) continue;
      const double w = h[static_cast<std::size_t>(a * k + b)];
      if (w != 0.0) acc += w * x[static_cast<std::size_t>(r * s.cols + q)];
    }
  }
  return acc;
}

inline double corr_pixel(ImageShape s, std::span<const double> h, Index k,
                         std::span<const double> x, Index i, Index j) {
  const Index c = k / 2;
  double acc = 0.0;
  for (Index a = 0; a < k; ++a) {
    const Index r = i - c + a;
    if (r < 0 || r >= s.rows) continue;
    for (Index b = 0; b < k; ++b) {
      const Index q = j - c + b;
      if (q < 0 || q >= s.cols) continue;
      const double w = h[static_cast<std::size_t>(a * k + b)];
      if (w != 0.0) acc += w * x[static_cast<std::size_t>(r * s.cols + q)];
    }
  }
  return acc;
}

// Row block [r0, r1) of out = a * in, accumulated column by column.
inline void gemv_rows(const Matrix& a, std::span<const double> in, std::span<double> out,
                      Index r0, Index r1) {
  for (Index i = r0; i < r1; ++i) out[static_cast<std::size_t>(i)] = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    const double xj = in[static_cast<std::size_t>(j)];
    const double* col = a.data() + j * a.rows();
    for (Index i = r0; i < r1; ++i) out[static_cast<std::size_t>(i)] += col[i] * xj;
  }
}

inline double column_dot(const Matrix& a, Index j, std::span<const double> in) {
  const double* col = a.data() + j * a.rows();
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) acc += col[i] * in[static_cast<std::size_t>(i)];
  return acc;
}

inline double squared_distance(const Matrix& m, Index i, Index j) {
  const double* a = m.data() + i * m.rows();
  const double* b = m.data() + j * m.rows();
  double acc = 0.0;
  for (Index t = 0; t < m.rows(); ++t) {
    const double d = a[t] - b[t];
    acc += d * d;
  }
  return acc;
}

// Returns a negative value for coincident points.
inline double pair_ratio(const Matrix& samples, const Matrix& coords, Index i, Index j) {
  const double full = squared_distance(samples, i, j);
  if (full == 0.0) return -1.0;
  const double ker = coords.rows() == 0 ? 0.0 : squared_distance(coords, i, j);
  return std::sqrt(ker / full);
}

inline void project_column(const Matrix& basis, const Matrix& samples, Matrix& out, Index col) {
  const Index d = basis.rows();
  const double* s = samples.data() + col * d;
  double* o = out.data() + col * d;
  for (Index t = 0; t < d; ++t) o[t] = 0.0;
  for (Index b = 0; b < basis.cols(); ++b) {
    const double* v = basis.data() + b * d;
    double c = 0.0;
    for (Index t = 0; t < d; ++t) c += v[t] * s[t];
    for (Index t = 0; t < d; ++t) o[t] += c * v[t];
  }
}

}  // namespace eqreg::kernels::detail

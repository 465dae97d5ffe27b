#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::omp`. Both use the same
// per-element summation order, so their outputs are bit-identical for any
// thread count.

#include "eqreg/types.hpp"

#include <cstdint>
#include <span>
#include <utility>

namespace eqreg::kernels {

struct PairRatio {
  double max_ratio = 0.0;
  std::int64_t pairs = 0;  // pairs with nonzero separation
};

using PairList = std::span<const std::pair<Index, Index>>;

inline std::span<const double> view(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

namespace serial {

/// out = x with every row flagged in `zeroed` (one flag per image row) set to 0.
void mask_rows(ImageShape shape, std::span<const std::uint8_t> zeroed,
               std::span<const double> in, std::span<double> out);

/// Same-size 2D convolution, zero padded, k x k kernel stored row-major.
void conv2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                 std::span<const double> in, std::span<double> out);

/// Adjoint of conv2d_same (correlation with the same kernel).
void correlate2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                      std::span<const double> in, std::span<double> out);

/// out = a * in
void gemv(const Matrix& a, std::span<const double> in, std::span<double> out);
/// out = a^T * in
void gemv_t(const Matrix& a, std::span<const double> in, std::span<double> out);

/// Columns of `samples` are points, columns of `coords` their kernel
/// coordinates. Returns max ||c_i - c_j|| / ||s_i - s_j|| over all pairs i < j.
PairRatio pair_ratio_all(const Matrix& samples, const Matrix& coords);
PairRatio pair_ratio_listed(const Matrix& samples, const Matrix& coords, PairList pairs);

/// out = basis * (basis^T * samples), column by column.
void project_columns(const Matrix& basis, const Matrix& samples, Matrix& out);

}  // namespace serial

namespace omp {

void mask_rows(ImageShape shape, std::span<const std::uint8_t> zeroed,
               std::span<const double> in, std::span<double> out);
void conv2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                 std::span<const double> in, std::span<double> out);
void correlate2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                      std::span<const double> in, std::span<double> out);
void gemv(const Matrix& a, std::span<const double> in, std::span<double> out);
void gemv_t(const Matrix& a, std::span<const double> in, std::span<double> out);
PairRatio pair_ratio_all(const Matrix& samples, const Matrix& coords);
PairRatio pair_ratio_listed(const Matrix& samples, const Matrix& coords, PairList pairs);
void project_columns(const Matrix& basis, const Matrix& samples, Matrix& out);

}  // namespace omp

/// Caps the OpenMP team size used by the omp kernels and the sweep.
void set_thread_cap(int threads);
int thread_cap();

/// Reads EQREG_THREADS; returns 0 when unset or unparsable.
int thread_cap_from_env();

}  // namespace eqreg::kernels

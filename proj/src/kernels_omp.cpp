#include "eqreg/kernels.hpp"

#include "kernel_bodies.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace eqreg::kernels {

namespace {
// Below these sizes the team start-up costs more than the loop.
constexpr Index kMinParallelPixels = 4096;
constexpr Index kMinParallelRows = 256;
constexpr Index kRowBlock = 64;
}  // namespace

namespace omp {

void mask_rows(ImageShape shape, std::span<const std::uint8_t> zeroed,
               std::span<const double> in, std::span<double> out) {
  const Index n = shape.size();
#pragma omp parallel for schedule(static) if (n >= kMinParallelPixels)
  for (Index p = 0; p < n; ++p) {
    const bool z = zeroed[static_cast<std::size_t>(p / shape.cols)] != 0;
    out[static_cast<std::size_t>(p)] = z ? 0.0 : in[static_cast<std::size_t>(p)];
  }
}

void conv2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                 std::span<const double> in, std::span<double> out) {
  const Index n = shape.size();
#pragma omp parallel for schedule(static) if (n >= kMinParallelPixels)
  for (Index p = 0; p < n; ++p)
    out[static_cast<std::size_t>(p)] =
        detail::conv_pixel(shape, kernel, k, in, p / shape.cols, p % shape.cols);
}

void correlate2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                      std::span<const double> in, std::span<double> out) {
  const Index n = shape.size();
#pragma omp parallel for schedule(static) if (n >= kMinParallelPixels)
  for (Index p = 0; p < n; ++p)
    out[static_cast<std::size_t>(p)] =
        detail::corr_pixel(shape, kernel, k, in, p / shape.cols, p % shape.cols);
}

void gemv(const Matrix& a, std::span<const double> in, std::span<double> out) {
  const Index blocks = (a.rows() + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) if (a.rows() >= kMinParallelRows)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * kRowBlock;
    detail::gemv_rows(a, in, out, r0, std::min(a.rows(), r0 + kRowBlock));
  }
}

void gemv_t(const Matrix& a, std::span<const double> in, std::span<double> out) {
#pragma omp parallel for schedule(static) if (a.cols() >= kMinParallelRows)
  for (Index j = 0; j < a.cols(); ++j)
    out[static_cast<std::size_t>(j)] = detail::column_dot(a, j, in);
}

PairRatio pair_ratio_all(const Matrix& samples, const Matrix& coords) {
  const Index n = samples.cols();
  double best = 0.0;
  std::int64_t count = 0;
  // max is exact, so the reduction is independent of the schedule
#pragma omp parallel for schedule(dynamic, 8) reduction(max : best) reduction(+ : count)
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double r = detail::pair_ratio(samples, coords, i, j);
      if (r < 0.0) continue;
      ++count;
      best = std::max(best, r);
    }
  }
  return {best, count};
}

PairRatio pair_ratio_listed(const Matrix& samples, const Matrix& coords, PairList pairs) {
  const auto n = static_cast<std::int64_t>(pairs.size());
  double best = 0.0;
  std::int64_t count = 0;
#pragma omp parallel for schedule(static) reduction(max : best) reduction(+ : count)
  for (std::int64_t p = 0; p < n; ++p) {
    const auto& [i, j] = pairs[static_cast<std::size_t>(p)];
    const double r = detail::pair_ratio(samples, coords, i, j);
    if (r < 0.0) continue;
    ++count;
    best = std::max(best, r);
  }
  return {best, count};
}

void project_columns(const Matrix& basis, const Matrix& samples, Matrix& out) {
  out.resize(samples.rows(), samples.cols());
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < samples.cols(); ++c) detail::project_column(basis, samples, out, c);
}

}  // namespace omp

void set_thread_cap(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_cap() { return omp_get_max_threads(); }

int thread_cap_from_env() {
  const char* raw = std::getenv("EQREG_THREADS");
  if (raw == nullptr) return 0;
  try {
    const int v = std::stoi(raw);
    return v > 0 ? v : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace eqreg::kernels

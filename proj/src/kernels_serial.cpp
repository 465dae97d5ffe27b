#include "eqreg/kernels.hpp"

#include "kernel_bodies.hpp"

namespace eqreg::kernels::serial {

void mask_rows(ImageShape shape, std::span<const std::uint8_t> zeroed,
               std::span<const double> in, std::span<double> out) {
  for (Index r = 0; r < shape.rows; ++r) {
    const bool z = zeroed[static_cast<std::size_t>(r)] != 0;
    for (Index c = 0; c < shape.cols; ++c) {
      const auto p = static_cast<std::size_t>(r * shape.cols + c);
      out[p] = z ? 0.0 : in[p];
    }
  }
}

void conv2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                 std::span<const double> in, std::span<double> out) {
  for (Index i = 0; i < shape.rows; ++i)
    for (Index j = 0; j < shape.cols; ++j)
      out[static_cast<std::size_t>(i * shape.cols + j)] =
          detail::conv_pixel(shape, kernel, k, in, i, j);
}

void correlate2d_same(ImageShape shape, std::span<const double> kernel, Index k,
                      std::span<const double> in, std::span<double> out) {
  for (Index i = 0; i < shape.rows; ++i)
    for (Index j = 0; j < shape.cols; ++j)
      out[static_cast<std::size_t>(i * shape.cols + j)] =
          detail::corr_pixel(shape, kernel, k, in, i, j);
}

void gemv(const Matrix& a, std::span<const double> in, std::span<double> out) {
  detail::gemv_rows(a, in, out, 0, a.rows());
}

void gemv_t(const Matrix& a, std::span<const double> in, std::span<double> out) {
  for (Index j = 0; j < a.cols(); ++j)
    out[static_cast<std::size_t>(j)] = detail::column_dot(a, j, in);
}

PairRatio pair_ratio_all(const Matrix& samples, const Matrix& coords) {
  PairRatio result;
  const Index n = samples.cols();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double r = detail::pair_ratio(samples, coords, i, j);
      if (r < 0.0) continue;
      ++result.pairs;
      if (r > result.max_ratio) result.max_ratio = r;
    }
  }
  return result;
}

PairRatio pair_ratio_listed(const Matrix& samples, const Matrix& coords, PairList pairs) {
  PairRatio result;
  for (const auto& [i, j] : pairs) {
    const double r = detail::pair_ratio(samples, coords, i, j);
    if (r < 0.0) continue;
    ++result.pairs;
    if (r > result.max_ratio) result.max_ratio = r;
  }
  return result;
}

void project_columns(const Matrix& basis, const Matrix& samples, Matrix& out) {
  out.resize(samples.rows(), samples.cols());
  for (Index c = 0; c < samples.cols(); ++c) detail::project_column(basis, samples, out, c);
}

}  // namespace eqreg::kernels::serial

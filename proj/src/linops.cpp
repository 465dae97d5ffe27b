#include "eqreg/linops.hpp"

#include "eqreg/kernels.hpp"
#include "eqreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace eqreg {

namespace {

using kernels::view;

void require_dim(Index got, Index want, const char* what) {
  if (got != want)
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(want) +
                          ", got " + std::to_string(got));
}

}  // namespace

LinearMap LinearMap::dense(Matrix coefficients) {
  if (coefficients.rows() == 0 || coefficients.cols() == 0)
    throw InvalidArgument("dense map needs positive dimensions");
  const Index out = coefficients.rows();
  const Index in = coefficients.cols();
  return LinearMap(out, in, Dense{std::move(coefficients)});
}

LinearMap LinearMap::identity(Index dim) { return dense(Matrix::Identity(dim, dim)); }

MapKind LinearMap::kind() const {
  switch (payload_.index()) {
    case 0:
      return MapKind::kDense;
    case 1:
      return MapKind::kInpainting;
    default:
      return MapKind::kConv2d;
  }
}

Vector LinearMap::apply(const Vector& x) const {
  require_dim(x.size(), in_dim_, "LinearMap::apply");
  Vector out(out_dim_);
  if (const auto* d = std::get_if<Dense>(&payload_)) {
    kernels::omp::gemv(d->m, view(x), view(out));
  } else if (const auto* p = std::get_if<Inpainting>(&payload_)) {
    kernels::omp::mask_rows(p->shape, p->mask, view(x), view(out));
  } else {
    const auto& c = std::get<Conv2d>(payload_);
    kernels::omp::conv2d_same(c.shape, c.kernel, c.k, view(x), view(out));
  }
  return out;
}

Vector LinearMap::adjoint(const Vector& y) const {
  require_dim(y.size(), out_dim_, "LinearMap::adjoint");
  Vector out(in_dim_);
  if (const auto* d = std::get_if<Dense>(&payload_)) {
    kernels::omp::gemv_t(d->m, view(y), view(out));
  } else if (const auto* p = std::get_if<Inpainting>(&payload_)) {
    kernels::omp::mask_rows(p->shape, p->mask, view(y), view(out));
  } else {
    const auto& c = std::get<Conv2d>(payload_);
    kernels::omp::correlate2d_same(c.shape, c.kernel, c.k, view(y), view(out));
  }
  return out;
}

Matrix LinearMap::to_dense() const {
  if (const auto* d = std::get_if<Dense>(&payload_)) return d->m;
  Matrix m = Matrix::Zero(out_dim_, in_dim_);
  if (const auto* p = std::get_if<Inpainting>(&payload_)) {
    for (Index i = 0; i < in_dim_; ++i)
      if (p->mask[static_cast<std::size_t>(i / p->shape.cols)] == 0) m(i, i) = 1.0;
    return m;
  }
  const auto& c = std::get<Conv2d>(payload_);
  const Index half = c.k / 2;
  for (Index i = 0; i < c.shape.rows; ++i) {
    for (Index j = 0; j < c.shape.cols; ++j) {
      for (Index a = 0; a < c.k; ++a) {
        for (Index b = 0; b < c.k; ++b) {
          const double w = c.kernel[static_cast<std::size_t>(a * c.k + b)];
          const Index r = i + half - a;
          const Index q = j + half - b;
          if (w == 0.0 || r < 0 || r >= c.shape.rows || q < 0 || q >= c.shape.cols) continue;
          m(i * c.shape.cols + j, r * c.shape.cols + q) += w;
        }
      }
    }
  }
  return m;
}

const Matrix& LinearMap::coefficients() const {
  if (const auto* d = std::get_if<Dense>(&payload_)) return d->m;
  throw InvalidArgument("coefficients() requires a dense map");
}

ImageShape LinearMap::image_shape() const {
  if (const auto* p = std::get_if<Inpainting>(&payload_)) return p->shape;
  if (const auto* c = std::get_if<Conv2d>(&payload_)) return c->shape;
  throw InvalidArgument("image_shape() requires an image operator");
}

const std::vector<Index>& LinearMap::zeroed_rows() const {
  if (const auto* p = std::get_if<Inpainting>(&payload_)) return p->rows;
  throw InvalidArgument("zeroed_rows() requires an inpainting map");
}

Index LinearMap::kernel_size() const {
  if (const auto* c = std::get_if<Conv2d>(&payload_)) return c->k;
  throw InvalidArgument("kernel_size() requires a convolution map");
}

LinearMap make_inpainting(ImageShape shape, std::vector<Index> zeroed_rows) {
  if (shape.rows <= 0 || shape.cols <= 0) throw InvalidArgument("image shape must be positive");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(shape.rows), 0);
  for (const Index r : zeroed_rows) {
    if (r < 0 || r >= shape.rows)
      throw InvalidArgument("zeroed row " + std::to_string(r) + " outside [0, " +
                            std::to_string(shape.rows) + ")");
    mask[static_cast<std::size_t>(r)] = 1;
  }
  std::sort(zeroed_rows.begin(), zeroed_rows.end());
  zeroed_rows.erase(std::unique(zeroed_rows.begin(), zeroed_rows.end()), zeroed_rows.end());
  return LinearMap(shape.size(), shape.size(),
                   LinearMap::Inpainting{shape, std::move(zeroed_rows), std::move(mask)});
}

LinearMap make_motion_blur(ImageShape shape, Index k) {
  if (shape.rows <= 0 || shape.cols <= 0) throw InvalidArgument("image shape must be positive");
  if (k <= 0 || k % 2 == 0) throw InvalidArgument("blur kernel size must be odd and positive");
  if (k > std::min(shape.rows, shape.cols))
    throw InvalidArgument("blur kernel larger than the image");
  std::vector<double> kernel(static_cast<std::size_t>(k * k), 0.0);
  for (Index i = 0; i < k; ++i) kernel[static_cast<std::size_t>(i * k + i)] = 1.0;
  return LinearMap(shape.size(), shape.size(), LinearMap::Conv2d{shape, k, std::move(kernel)});
}

namespace {

template <class Apply, class Adjoint>
NormEstimate power_iteration(Index in_dim, Apply&& apply, Adjoint&& adjoint, double tol,
                             int max_iter, std::uint64_t seed) {
  if (!(tol > 0.0)) throw InvalidArgument("operator_norm: tol must be positive");
  Rng rng(seed);
  Vector v = gaussian_vector(rng, in_dim);
  v.normalize();

  NormEstimate est;
  double prev = -1.0;
  int confirm = -1;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector av = apply(v);
    const double sigma = av.norm();
    est.value = std::max(est.value, sigma);
    est.iterations = it;
    if (sigma == 0.0) {
      // the probe fell in the kernel; a zero map stays zero under any probe
      Vector w = gaussian_vector(rng, in_dim);
      if (apply(w).norm() == 0.0) {
        est.converged = true;
        return est;
      }
      v = w.normalized();
      continue;
    }
    if (confirm < 0 && prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) confirm = 10;
    if (confirm == 0) {
      est.converged = true;
      return est;
    }
    if (confirm > 0) --confirm;
    prev = sigma;
    Vector w = adjoint(av);
    const double wn = w.norm();
    if (wn == 0.0) break;
    v = w / wn;
  }
  return est;
}

}  // namespace

NormEstimate operator_norm(const LinearMap& map, double tol, int max_iter, std::uint64_t seed) {
  return power_iteration(
      map.in_dim(), [&](const Vector& x) { return map.apply(x); },
      [&](const Vector& y) { return map.adjoint(y); }, tol, max_iter, seed);
}

NormEstimate matrix_norm(const Matrix& m, double tol, int max_iter, std::uint64_t seed) {
  return power_iteration(
      m.cols(), [&](const Vector& x) -> Vector { return m * x; },
      [&](const Vector& y) -> Vector { return m.transpose() * y; }, tol, max_iter, seed);
}

SpectralDecomposition decompose(const LinearMap& map) {
  if (map.out_dim() > kMaxDenseSide || map.in_dim() > kMaxDenseSide)
    throw ResourceLimit("decompose: operator " + std::to_string(map.out_dim()) + "x" +
                        std::to_string(map.in_dim()) + " exceeds the dense limit of " +
                        std::to_string(kMaxDenseSide) + " per side");
  const Matrix dense = map.to_dense();
  Eigen::BDCSVD<Matrix> svd(dense, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SpectralDecomposition d;
  d.singular_values = svd.singularValues();
  d.left_vectors = svd.matrixU();
  d.right_vectors = svd.matrixV();
  d.out_dim = map.out_dim();
  d.in_dim = map.in_dim();
  return d;
}

KernelProjector::KernelProjector(Matrix basis, double threshold)
    : basis_(std::move(basis)), threshold_(threshold) {}

Vector KernelProjector::apply(const Vector& x) const {
  if (basis_.cols() == 0) return Vector::Zero(x.size());
  return basis_ * (basis_.transpose() * x);
}

Vector KernelProjector::coordinates(const Vector& x) const { return basis_.transpose() * x; }

Matrix KernelProjector::to_dense() const { return basis_ * basis_.transpose(); }

KernelProjector kernel_projector(const SpectralDecomposition& decomp, double threshold) {
  if (threshold < 0.0) throw InvalidArgument("kernel_projector: threshold must be >= 0");
  const Index n = decomp.in_dim;
  std::vector<Index> picked;
  for (Index i = 0; i < n; ++i) {
    // right vectors past min(out, in) carry an implicit zero singular value
    const double s = i < decomp.singular_values.size() ? decomp.singular_values[i] : 0.0;
    if (s < threshold) picked.push_back(i);
  }
  Matrix basis(n, static_cast<Index>(picked.size()));
  for (std::size_t c = 0; c < picked.size(); ++c)
    basis.col(static_cast<Index>(c)) = decomp.right_vectors.col(picked[c]);
  return KernelProjector(std::move(basis), threshold);
}

Vector pseudo_apply(const SpectralDecomposition& decomp, const Vector& y, double threshold) {
  if (!(threshold > 0.0)) throw InvalidArgument("pseudo_apply: threshold must be positive");
  require_dim(y.size(), decomp.out_dim, "pseudo_apply");
  Vector x = Vector::Zero(decomp.in_dim);
  for (Index i = 0; i < decomp.singular_values.size(); ++i) {
    const double s = decomp.singular_values[i];
    if (s < threshold) break;
    x += decomp.right_vectors.col(i) * (decomp.left_vectors.col(i).dot(y) / s);
  }
  return x;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(in[at + b]) << (8 * b);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr std::size_t kHeaderBytes = 16;

}  // namespace

std::vector<std::uint8_t> serialize_dense(const Matrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(m.size()) * 8);
  for (const char c : {'E', 'Q', 'L', 'M'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  return out;
}

Matrix deserialize_dense(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < kHeaderBytes) throw ParseError("container shorter than its header", bytes.size());
  if (bytes[0] != 'E' || bytes[1] != 'Q' || bytes[2] != 'L' || bytes[3] != 'M')
    throw ParseError("bad container magic", 0);
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kContainerVersion)
    throw ParseError("unsupported container version " + std::to_string(version), 4);
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  const std::size_t payload = static_cast<std::size_t>(rows) * cols * 8;
  if (bytes.size() < kHeaderBytes + payload)
    throw ParseError("container payload truncated: expected " + std::to_string(payload) +
                         " bytes, have " + std::to_string(bytes.size() - kHeaderBytes),
                     bytes.size());
  Matrix m(rows, cols);
  std::size_t at = kHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, at += 8) m(i, j) = get_f64(bytes, at);
  if (consumed != nullptr) *consumed = at;
  return m;
}

void save_dense_map(const LinearMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_dense(map.to_dense()));
}

LinearMap load_dense_map(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return LinearMap::dense(deserialize_dense(bytes));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace eqreg

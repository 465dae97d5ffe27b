#pragma once

#include "eqreg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace eqreg {

enum class MapKind : std::uint8_t { kDense, kInpainting, kConv2d };

/// Finite-dimensional linear forward operator with a matrix-free adjoint.
///
/// Structured kinds (inpainting, conv2d) never densify on apply/adjoint;
/// to_dense() exists for spectral work only.
class LinearMap {
 public:
  static LinearMap dense(Matrix coefficients);
  static LinearMap identity(Index dim);

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  MapKind kind() const;

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;

  /// Dense out_dim x in_dim coefficient matrix.
  Matrix to_dense() const;

  // Payload accessors; throw InvalidArgument on a kind mismatch.
  const Matrix& coefficients() const;
  ImageShape image_shape() const;
  const std::vector<Index>& zeroed_rows() const;
  Index kernel_size() const;

 private:
  struct Dense {
    Matrix m;
  };
  struct Inpainting {
    ImageShape shape;
    std::vector<Index> rows;
    std::vector<std::uint8_t> mask;  // one flag per image row
  };
  struct Conv2d {
    ImageShape shape;
    Index k;
    std::vector<double> kernel;  // k*k, row-major
  };

  LinearMap(Index out_dim, Index in_dim, std::variant<Dense, Inpainting, Conv2d> payload)
      : out_dim_(out_dim), in_dim_(in_dim), payload_(std::move(payload)) {}

  friend LinearMap make_inpainting(ImageShape shape, std::vector<Index> zeroed_rows);
  friend LinearMap make_motion_blur(ImageShape shape, Index k);

  Index out_dim_;
  Index in_dim_;
  std::variant<Dense, Inpainting, Conv2d> payload_;
};

/// Zeroes the listed image rows. Self-adjoint and idempotent.
LinearMap make_inpainting(ImageShape shape, std::vector<Index> zeroed_rows);

/// Diagonal motion blur: same-size, zero-padded convolution with the k x k
/// identity matrix as kernel. k must be odd and fit inside the image.
LinearMap make_motion_blur(ImageShape shape, Index k);

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value by power iteration on A^T A. The starting probe is
/// drawn from `seed`; once the relative change drops below `tol` ten more
/// confirmation iterations are run.
NormEstimate operator_norm(const LinearMap& map, double tol = 1e-12, int max_iter = 10000,
                           std::uint64_t seed = 0);

/// Largest singular value of a dense matrix by power iteration.
NormEstimate matrix_norm(const Matrix& m, double tol = 1e-12, int max_iter = 10000,
                         std::uint64_t seed = 0);

struct SpectralDecomposition {
  Vector singular_values;  // nonincreasing, length min(out, in)
  Matrix left_vectors;     // out x out
  Matrix right_vectors;    // in x in
  Index out_dim = 0;
  Index in_dim = 0;
};

/// Densified operators larger than this per side are rejected by decompose().
inline constexpr Index kMaxDenseSide = 2048;

/// Full SVD of the densified operator.
SpectralDecomposition decompose(const LinearMap& map);

inline constexpr double kDefaultSvdCutoff = 1e-12;

/// Orthogonal projector onto span{v_i : sigma_i < threshold}, stored as an
/// orthonormal basis B with P = B B^T.
class KernelProjector {
 public:
  KernelProjector(Matrix basis, double threshold);

  Index dim() const { return basis_.rows(); }
  Index rank() const { return basis_.cols(); }
  double threshold() const { return threshold_; }
  const Matrix& basis() const { return basis_; }

  Vector apply(const Vector& x) const;
  /// Coordinates B^T x of x in the kernel basis.
  Vector coordinates(const Vector& x) const;
  Matrix to_dense() const;

 private:
  Matrix basis_;
  double threshold_;
};

KernelProjector kernel_projector(const SpectralDecomposition& decomp,
                                 double threshold = kDefaultSvdCutoff);

/// Minimum-norm least-squares solution A^+ y, truncating singular values
/// below `threshold`.
Vector pseudo_apply(const SpectralDecomposition& decomp, const Vector& y,
                    double threshold = kDefaultSvdCutoff);

// Binary container: "EQLM", u32 version, u32 out_dim, u32 in_dim, then the
// row-major f64 payload, all little-endian.
inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> serialize_dense(const Matrix& m);
Matrix deserialize_dense(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

void save_dense_map(const LinearMap& map, const std::filesystem::path& path);
LinearMap load_dense_map(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace eqreg

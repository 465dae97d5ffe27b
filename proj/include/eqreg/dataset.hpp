#pragma once

#include "eqreg/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace eqreg {

enum class Provenance : std::uint8_t { kIdxFile, kSynthetic, kProjected };

/// A set of signals stored column-wise: samples is dim x n.
class Dataset {
 public:
  Dataset() = default;
  /// Throws InvalidArgument on non-finite entries.
  Dataset(Matrix samples, Provenance provenance, std::optional<ImageShape> shape_hint = {});

  Index dim() const { return samples_.rows(); }
  Index size() const { return samples_.cols(); }
  bool empty() const { return samples_.cols() == 0; }

  const Matrix& samples() const { return samples_; }
  Vector sample(Index i) const { return samples_.col(i); }
  Provenance provenance() const { return provenance_; }
  const std::optional<ImageShape>& shape_hint() const { return shape_hint_; }

  /// Columns listed in `indices`, in that order.
  Dataset subset(const std::vector<Index>& indices) const;

 private:
  Matrix samples_;
  Provenance provenance_ = Provenance::kSynthetic;
  std::optional<ImageShape> shape_hint_;
};

/// Orthogonal projector onto span(basis); basis columns are orthonormal.
struct SubspaceProjector {
  Matrix basis;  // dim x q
  double explained_energy = 0.0;

  Index dim() const { return basis.rows(); }
  Index q() const { return basis.cols(); }
  Vector apply(const Vector& x) const;
  Matrix to_dense() const { return basis * basis.transpose(); }
};

}  // namespace eqreg

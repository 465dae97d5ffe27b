#include "eqreg/dataset.hpp"

#include <string>

namespace eqreg {

Dataset::Dataset(Matrix samples, Provenance provenance, std::optional<ImageShape> shape_hint)
    : samples_(std::move(samples)), provenance_(provenance), shape_hint_(shape_hint) {
  if (!samples_.allFinite()) throw InvalidArgument("dataset contains non-finite entries");
  if (shape_hint_ && shape_hint_->size() != samples_.rows())
    throw InvalidArgument("shape hint " + std::to_string(shape_hint_->rows) + "x" +
                          std::to_string(shape_hint_->cols) + " does not match dim " +
                          std::to_string(samples_.rows()));
}

Dataset Dataset::subset(const std::vector<Index>& indices) const {
  Matrix picked(dim(), static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const Index i = indices[c];
    if (i < 0 || i >= size()) throw InvalidArgument("subset index out of range");
    picked.col(static_cast<Index>(c)) = samples_.col(i);
  }
  return Dataset(std::move(picked), provenance_, shape_hint_);
}

Vector SubspaceProjector::apply(const Vector& x) const {
  if (basis.cols() == 0) return Vector::Zero(x.size());
  return basis * (basis.transpose() * x);
}

}  // namespace eqreg

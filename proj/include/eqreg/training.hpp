#pragma once

#include "eqreg/dataset.hpp"
#include "eqreg/linops.hpp"
#include "eqreg/regularizers.hpp"

namespace eqreg {

/// Top-q principal directions of the mean-centred samples. Directions are
/// ordered by decreasing singular value (ties keep the lower index first) and
/// signed so that each basis vector's largest-magnitude entry is positive.
/// The returned projector is linear: it projects onto the span of the
/// directions and does not add the mean back.
SubspaceProjector pca_fit(const Dataset& dataset, Index q);

/// Replaces every sample by its projection onto span(pv).
Dataset project_dataset(const Dataset& dataset, const SubspaceProjector& pv);

struct TrainedRegularizer {
  RegOperator reg;
  SubspaceProjector subspace;
  double training_loss = 0.0;  // L_0 on the projected training set
};

/// Fits P_V by PCA and returns G = id - P_ker P_V, which attains zero L_0 loss
/// on P_V(S). Throws ContractivityViolation when ||P_ker P_V|| >= 1.
TrainedRegularizer train_linear_reg(const Dataset& dataset, const KernelProjector& pker, Index q);

}  // namespace eqreg

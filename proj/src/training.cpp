#include "eqreg/training.hpp"

#include "eqreg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace eqreg {

SubspaceProjector pca_fit(const Dataset& dataset, Index q) {
  const Index limit = std::min(dataset.dim(), dataset.size());
  if (q < 1 || q > limit)
    throw InvalidArgument("pca_fit: q = " + std::to_string(q) + " outside [1, " +
                          std::to_string(limit) + "]");

  const Vector mean = dataset.samples().rowwise().mean();
  const Matrix centered = dataset.samples().colwise() - mean;
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  const Vector& sigma = svd.singularValues();
  const Matrix& u = svd.matrixU();

  std::vector<Index> order(static_cast<std::size_t>(sigma.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return sigma[a] > sigma[b]; });

  SubspaceProjector pv;
  pv.basis.resize(dataset.dim(), q);
  for (Index c = 0; c < q; ++c) {
    Vector v = u.col(order[static_cast<std::size_t>(c)]);
    Index arg = 0;
    for (Index i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0) v = -v;
    pv.basis.col(c) = v;
  }

  const double total = sigma.squaredNorm();
  double kept = 0.0;
  for (Index c = 0; c < q; ++c) {
    const double s = sigma[order[static_cast<std::size_t>(c)]];
    kept += s * s;
  }
  pv.explained_energy = total > 0.0 ? std::min(1.0, kept / total) : 0.0;
  return pv;
}

Dataset project_dataset(const Dataset& dataset, const SubspaceProjector& pv) {
  if (pv.dim() != dataset.dim())
    throw InvalidArgument("project_dataset: subspace dim " + std::to_string(pv.dim()) +
                          " does not match dataset dim " + std::to_string(dataset.dim()));
  Matrix out;
  kernels::omp::project_columns(pv.basis, dataset.samples(), out);
  return Dataset(std::move(out), Provenance::kProjected, dataset.shape_hint());
}

TrainedRegularizer train_linear_reg(const Dataset& dataset, const KernelProjector& pker, Index q) {
  SubspaceProjector pv = pca_fit(dataset, q);
  RegOperator g = make_subspace_reg(pker, pv);
  const Dataset projected = project_dataset(dataset, pv);
  const double loss = loss_value(g, projected, pker, 0.0);
  return {std::move(g), std::move(pv), loss};
}

}  // namespace eqreg

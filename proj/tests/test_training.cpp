#include "eqreg/training.hpp"

#include "eqreg/data.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace eqreg;

TEST(Pca, TwoSamplesGiveFirstAxis) {
  Matrix s(2, 2);
  s << 1, 0, 0, 0;
  const SubspaceProjector pv = pca_fit(Dataset(s, Provenance::kSynthetic), 1);
  ASSERT_EQ(pv.q(), 1);
  EXPECT_NEAR(pv.basis(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(pv.basis(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(pv.explained_energy, 1.0, 1e-15);
}

TEST(Pca, MatchesCovarianceEigenvectors) {
  std::mt19937_64 rng(50);
  // 100 samples of dimension 20
  const Matrix s = oracle::random_matrix(rng, 20, 100);
  const SubspaceProjector pv = pca_fit(Dataset(s, Provenance::kSynthetic), 5);

  const Matrix centered = s.colwise() - s.rowwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(centered * centered.transpose());
  for (Index c = 0; c < 5; ++c) {
    const Vector ref = es.eigenvectors().col(19 - c);
    const Vector got = pv.basis.col(c);
    EXPECT_LE(std::min((got - ref).norm(), (got + ref).norm()), 1e-8) << "component " << c;
  }
  const Matrix top = es.eigenvectors().rightCols(5);
  EXPECT_LE((pv.to_dense() - top * top.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, BasisIsOrthonormalWithSignConvention) {
  std::mt19937_64 rng(51);
  const SubspaceProjector pv = pca_fit(Dataset(oracle::random_matrix(rng, 15, 40), Provenance::kSynthetic), 6);
  EXPECT_LE((pv.basis.transpose() * pv.basis - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
  for (Index c = 0; c < 6; ++c) {
    Index arg;
    pv.basis.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(pv.basis(arg, c), 0.0);
  }
  EXPECT_GT(pv.explained_energy, 0.0);
  EXPECT_LE(pv.explained_energy, 1.0);
}

TEST(Pca, ExactSubspaceDataIsReproduced) {
  const SyntheticSet syn = make_synthetic(30, 4, 60, 52);
  const SubspaceProjector pv = pca_fit(syn.data, 4);
  for (Index i = 0; i < syn.data.size(); ++i) {
    const Vector x = syn.data.sample(i);
    EXPECT_LE((pv.apply(x) - x).norm(), 1e-8);
  }
}

TEST(Pca, RejectsBadRank) {
  const Dataset d(Matrix::Ones(4, 3), Provenance::kSynthetic);
  EXPECT_THROW(pca_fit(d, 0), InvalidArgument);
  EXPECT_THROW(pca_fit(d, 4), InvalidArgument);
}

TEST(Pca, DeterministicAcrossCalls) {
  std::mt19937_64 rng(53);
  const Dataset d(oracle::random_matrix(rng, 12, 30), Provenance::kSynthetic);
  EXPECT_EQ(pca_fit(d, 3).basis, pca_fit(d, 3).basis);
}

TEST(Projection, Cases) {
  std::mt19937_64 rng(54);
  const Dataset d(oracle::random_matrix(rng, 6, 9), Provenance::kSynthetic, ImageShape{2, 3});

  SubspaceProjector full;
  full.basis = Matrix::Identity(6, 6);
  EXPECT_LE((project_dataset(d, full).samples() - d.samples()).cwiseAbs().maxCoeff(), 1e-15);

  SubspaceProjector none;
  none.basis = Matrix(6, 0);
  const Dataset zero = project_dataset(d, none);
  EXPECT_EQ(zero.samples(), Matrix::Zero(6, 9));
  EXPECT_EQ(zero.provenance(), Provenance::kProjected);
  EXPECT_EQ(zero.shape_hint(), d.shape_hint());

  const SubspaceProjector pv = pca_fit(d, 3);
  const Dataset once = project_dataset(d, pv);
  const Dataset twice = project_dataset(once, pv);
  EXPECT_LE((once.samples() - twice.samples()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((once.samples() - oracle::span_projector(pv.basis) * d.samples()).cwiseAbs().maxCoeff(), 1e-12);

  SubspaceProjector wrong;
  wrong.basis = Matrix::Identity(5, 5);
  EXPECT_THROW(project_dataset(d, wrong), InvalidArgument);
}

TEST(Training, TrainedOperatorBeatsIdentityLoss) {
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({8, 8}, {2, 5})));
  const SyntheticSet syn = make_synthetic(64, 8, 200, 55);
  const TrainedRegularizer t = train_linear_reg(syn.data, pk, 8);
  const Dataset projected = project_dataset(syn.data, t.subspace);

  EXPECT_LE(t.training_loss, 1e-20);
  EXPECT_NEAR(t.training_loss, loss_value(t.reg, projected, pk), 1e-24);
  const double id_loss = loss_value(RegOperator::identity(64), projected, pk);
  EXPECT_LT(t.training_loss, id_loss);
  EXPECT_LT(t.reg.lipschitz_bound(), 1.0);
  EXPECT_GT(t.reg.lipschitz_bound(), 0.0);
}

TEST(Training, CertificateMatchesPowerIterationNorm) {
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({8, 8}, {0, 7})));
  const SyntheticSet syn = make_synthetic(64, 8, 120, 56);
  const TrainedRegularizer t = train_linear_reg(syn.data, pk, 8);
  const Matrix composite = pk.to_dense() * t.subspace.to_dense();
  EXPECT_NEAR(t.reg.lipschitz_bound(), matrix_norm(composite).value, 1e-8);
}

TEST(Training, ProjectedSignalsAreMappedOutOfTheKernel) {
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({8, 8}, {3})));
  const SyntheticSet syn = make_synthetic(64, 6, 80, 57);
  const TrainedRegularizer t = train_linear_reg(syn.data, pk, 6);
  const Dataset projected = project_dataset(syn.data, t.subspace);
  for (Index i = 0; i < projected.size(); ++i)
    EXPECT_LE(pk.apply(t.reg.apply(projected.sample(i))).norm(), 1e-10);
}

TEST(Training, RecoverabilityConstantBelowCertificate) {
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({8, 8}, {1, 4})));
  const SyntheticSet syn = make_synthetic(64, 8, 150, 58);
  const TrainedRegularizer t = train_linear_reg(syn.data, pk, 8);
  const Dataset projected = project_dataset(syn.data, t.subspace);
  EXPECT_LE(recoverability_constant(projected, pk).value, t.reg.lipschitz_bound() + 1e-8);
}

TEST(Training, DataAvoidingKernelIsDegenerateOptimum) {
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({4, 4}, {0})));
  std::mt19937_64 rng(59);
  Matrix s = oracle::random_matrix(rng, 16, 30);
  s.topRows(4).setZero();
  const Dataset d(s, Provenance::kSynthetic);
  const TrainedRegularizer t = train_linear_reg(d, pk, 3);
  EXPECT_LE(t.training_loss, 1e-24);
  EXPECT_LE(loss_value(RegOperator::identity(16), project_dataset(d, t.subspace), pk), 1e-24);
  EXPECT_LE(t.reg.lipschitz_bound(), 1e-12);
}

TEST(Training, OversizedSubspaceIsRejected) {
  // q = dim forces V to contain ker(A)
  const KernelProjector pk = kernel_projector(decompose(make_inpainting({3, 3}, {1})));
  std::mt19937_64 rng(60);
  const Dataset d(oracle::random_matrix(rng, 9, 20), Provenance::kSynthetic);
  EXPECT_THROW(train_linear_reg(d, pk, 9), ContractivityViolation);
}

}  // namespace

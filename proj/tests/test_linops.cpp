#include "eqreg/linops.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

namespace {

using namespace eqreg;

double adjoint_gap(const LinearMap& a, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector x = oracle::random_vector(rng, a.in_dim());
    const Vector y = oracle::random_vector(rng, a.out_dim());
    const double gap = std::abs(a.apply(x).dot(y) - x.dot(a.adjoint(y)));
    worst = std::max(worst, gap / ((1 + x.norm()) * (1 + y.norm())));
  }
  return worst;
}

TEST(Inpainting, MasksListedRows) {
  const LinearMap a = make_inpainting({2, 2}, {0});
  Vector x(4);
  x << 1, 2, 3, 4;
  Vector expect(4);
  expect << 0, 0, 3, 4;
  EXPECT_EQ(a.apply(x), expect);
  EXPECT_EQ(a.kind(), MapKind::kInpainting);
}

TEST(Inpainting, EmptyRowSetIsIdentity) {
  const LinearMap a = make_inpainting({4, 3}, {});
  EXPECT_EQ(a.to_dense(), Matrix::Identity(12, 12));
  EXPECT_NEAR(operator_norm(a).value, 1.0, 1e-12);
}

TEST(Inpainting, RejectsOutOfRangeRow) {
  EXPECT_THROW(make_inpainting({4, 4}, {4}), InvalidArgument);
  EXPECT_THROW(make_inpainting({4, 4}, {-1}), InvalidArgument);
}

TEST(Inpainting, DenseFormSelfAdjointIdempotent) {
  const LinearMap a = make_inpainting({28, 28}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Matrix d = a.to_dense();
  EXPECT_EQ(d, oracle::dense_row_mask(28, 28, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(d, d.transpose());
  EXPECT_EQ(d * d, d);
  EXPECT_NEAR(operator_norm(a).value, 1.0, 1e-9);
}

TEST(Inpainting, KernelProjectorIsComplementOfMask) {
  const LinearMap a = make_inpainting({28, 28}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const KernelProjector p = kernel_projector(decompose(a));
  EXPECT_EQ(p.rank(), 280);
  const Matrix expect = Matrix::Identity(784, 784) - a.to_dense();
  EXPECT_LE((p.to_dense() - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MotionBlur, SizeOneIsIdentity) {
  const LinearMap a = make_motion_blur({5, 6}, 1);
  EXPECT_EQ(a.to_dense(), Matrix::Identity(30, 30));
}

TEST(MotionBlur, CentredPixelSpreadsAlongDiagonal) {
  const LinearMap a = make_motion_blur({5, 5}, 3);
  Vector x = Vector::Zero(25);
  x[12] = 1.0;
  const Vector y = a.apply(x);
  Vector expect = Vector::Zero(25);
  expect[6] = expect[12] = expect[18] = 1.0;
  EXPECT_EQ(y, expect);
  EXPECT_LE((a.to_dense() - oracle::dense_convolution(5, 5, Matrix::Identity(3, 3))).norm(), 0.0);
}

TEST(MotionBlur, DenseRowsSumToAtMostK) {
  const LinearMap a = make_motion_blur({28, 28}, 5);
  const Matrix d = a.to_dense();
  EXPECT_LE(d.rowwise().sum().maxCoeff(), 5.0);
  EXPECT_EQ(d.rowwise().sum().maxCoeff(), 5.0);
  EXPECT_EQ(a.kernel_size(), 5);
}

TEST(MotionBlur, RejectsBadKernel) {
  EXPECT_THROW(make_motion_blur({5, 5}, 2), InvalidArgument);
  EXPECT_THROW(make_motion_blur({5, 5}, 7), InvalidArgument);
}

TEST(LinearMap, AdjointIdentityForEveryKind) {
  std::mt19937_64 rng(10);
  EXPECT_LE(adjoint_gap(LinearMap::dense(oracle::random_matrix(rng, 7, 4)), rng), 1e-10);
  EXPECT_LE(adjoint_gap(make_inpainting({6, 5}, {1, 4}), rng), 1e-10);
  EXPECT_LE(adjoint_gap(make_motion_blur({9, 8}, 5), rng), 1e-10);
  EXPECT_LE(adjoint_gap(LinearMap::identity(5), rng), 1e-10);
}

TEST(LinearMap, ApplyIsLinear) {
  std::mt19937_64 rng(11);
  const LinearMap a = make_motion_blur({7, 7}, 3);
  const Vector x = oracle::random_vector(rng, 49), z = oracle::random_vector(rng, 49);
  const Vector lhs = a.apply(2.5 * x - 0.75 * z);
  const Vector rhs = 2.5 * a.apply(x) - 0.75 * a.apply(z);
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

TEST(LinearMap, PayloadAccessorsCheckKind) {
  const LinearMap a = make_inpainting({3, 3}, {1});
  EXPECT_THROW(a.coefficients(), InvalidArgument);
  EXPECT_THROW(a.kernel_size(), InvalidArgument);
  EXPECT_EQ(a.zeroed_rows(), std::vector<Index>{1});
  EXPECT_EQ(a.image_shape(), (ImageShape{3, 3}));
}

TEST(OperatorNorm, DiagonalAndIdentity) {
  EXPECT_NEAR(operator_norm(LinearMap::identity(7)).value, 1.0, 1e-12);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  const NormEstimate e = operator_norm(LinearMap::dense(d));
  EXPECT_NEAR(e.value, 3.0, 1e-12);
  EXPECT_TRUE(e.converged);
}

TEST(OperatorNorm, MatchesEigenOracleOnRandomMatrices) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    const Matrix m = oracle::random_matrix(rng, 6, 5);
    EXPECT_NEAR(operator_norm(LinearMap::dense(m)).value, oracle::spectral_norm(m),
                1e-8 * oracle::spectral_norm(m));
    EXPECT_NEAR(matrix_norm(m).value, oracle::spectral_norm(m), 1e-8 * oracle::spectral_norm(m));
  }
}

TEST(OperatorNorm, ZeroMapAndDeterminism) {
  EXPECT_EQ(operator_norm(LinearMap::dense(Matrix::Zero(3, 4))).value, 0.0);
  std::mt19937_64 rng(13);
  const LinearMap a = LinearMap::dense(oracle::random_matrix(rng, 9, 9));
  EXPECT_EQ(operator_norm(a, 1e-12, 10000, 5).value, operator_norm(a, 1e-12, 10000, 5).value);
}

TEST(OperatorNorm, UnconvergedIsFlagged) {
  std::mt19937_64 rng(14);
  const NormEstimate e = operator_norm(LinearMap::dense(oracle::random_matrix(rng, 30, 30)), 1e-15, 2);
  EXPECT_FALSE(e.converged);
  EXPECT_GT(e.value, 0.0);
}

TEST(Decompose, SmallCases) {
  const SpectralDecomposition id = decompose(LinearMap::identity(3));
  EXPECT_LE((id.singular_values - Vector::Ones(3)).norm(), 1e-14);

  const SpectralDecomposition mask = decompose(make_inpainting({2, 2}, {0}));
  Vector expect(4);
  expect << 1, 1, 0, 0;
  EXPECT_LE((mask.singular_values - expect).norm(), 1e-14);

  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2;
  const SpectralDecomposition dg = decompose(LinearMap::dense(m));
  EXPECT_NEAR(dg.singular_values[0], 2.0, 1e-14);
  EXPECT_NEAR(dg.singular_values[1], 0.0, 1e-14);
}

TEST(Decompose, ReconstructsAndIsOrthonormal) {
  std::mt19937_64 rng(15);
  for (auto [r, c] : {std::pair{7, 4}, std::pair{4, 7}, std::pair{6, 6}}) {
    const Matrix m = oracle::random_matrix(rng, r, c);
    const SpectralDecomposition d = decompose(LinearMap::dense(m));
    Matrix sigma = Matrix::Zero(r, c);
    for (Index i = 0; i < d.singular_values.size(); ++i) sigma(i, i) = d.singular_values[i];
    EXPECT_LE((m - d.left_vectors * sigma * d.right_vectors.transpose()).norm(), 1e-8 * m.norm());
    EXPECT_LE((d.left_vectors.transpose() * d.left_vectors - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((d.right_vectors.transpose() * d.right_vectors - Matrix::Identity(c, c)).cwiseAbs().maxCoeff(), 1e-10);
    for (Index i = 1; i < d.singular_values.size(); ++i)
      EXPECT_GE(d.singular_values[i - 1], d.singular_values[i]);
    const auto oracle_s = oracle::singular_values(m);
    for (std::size_t i = 0; i < oracle_s.size(); ++i)
      EXPECT_NEAR(d.singular_values[static_cast<Index>(i)], oracle_s[i], 1e-10);
  }
}

TEST(Decompose, RejectsOversizedOperator) {
  EXPECT_THROW(decompose(make_inpainting({kMaxDenseSide + 1, 1}, {})), ResourceLimit);
}

TEST(KernelProjector, FullRankGivesZeroProjector) {
  std::mt19937_64 rng(16);
  const KernelProjector p = kernel_projector(decompose(LinearMap::dense(oracle::random_matrix(rng, 5, 5))));
  EXPECT_EQ(p.rank(), 0);
  EXPECT_EQ(p.apply(Vector::Ones(5)), Vector::Zero(5));
}

TEST(KernelProjector, RankDeficientMatchesOracle) {
  std::mt19937_64 rng(17);
  const Matrix m = oracle::random_matrix(rng, 5, 3) * oracle::random_matrix(rng, 3, 5);
  const KernelProjector p = kernel_projector(decompose(LinearMap::dense(m)), 1e-9);
  EXPECT_EQ(p.rank(), 2);
  EXPECT_LE((p.to_dense() - oracle::null_projector(m, 1e-6)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KernelProjector, ProjectorInvariants) {
  const LinearMap a = make_motion_blur({8, 8}, 5);
  const KernelProjector p = kernel_projector(decompose(a));
  std::mt19937_64 rng(18);
  for (int t = 0; t < 20; ++t) {
    const Vector x = oracle::random_vector(rng, 64), z = oracle::random_vector(rng, 64);
    EXPECT_LE((p.apply(p.apply(x)) - p.apply(x)).norm(), 1e-10 * x.norm());
    EXPECT_NEAR(p.apply(x).dot(z), x.dot(p.apply(z)), 1e-10 * x.norm() * z.norm());
    EXPECT_LE(a.apply(p.apply(x)).norm(), p.threshold() * 10 * x.norm());
  }
}

TEST(PseudoApply, Cases) {
  const Vector y = Vector::LinSpaced(4, 1, 4);
  EXPECT_LE((pseudo_apply(decompose(LinearMap::identity(4)), y) - y).norm(), 1e-14);

  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2;
  Vector y2(2);
  y2 << 4, 7;
  const Vector x = pseudo_apply(decompose(LinearMap::dense(m)), y2);
  EXPECT_NEAR(x[0], 2.0, 1e-14);
  EXPECT_NEAR(x[1], 0.0, 1e-14);

  std::mt19937_64 rng(19);
  const Matrix a = oracle::random_matrix(rng, 6, 4);
  const Vector truth = oracle::random_vector(rng, 4);
  const Vector rec = pseudo_apply(decompose(LinearMap::dense(a)), a * truth);
  const Vector normal_eq = (a.transpose() * a).ldlt().solve(a.transpose() * (a * truth));
  EXPECT_LE((rec - truth).norm(), 1e-8 * truth.norm());
  EXPECT_LE((rec - normal_eq).norm(), 1e-8 * truth.norm());
}

TEST(PseudoApply, OrthogonalToKernel) {
  const LinearMap a = make_motion_blur({9, 9}, 5);
  const SpectralDecomposition d = decompose(a);
  const KernelProjector p = kernel_projector(d);
  std::mt19937_64 rng(20);
  const Vector y = oracle::random_vector(rng, 81);
  const Vector x = pseudo_apply(d, y);
  for (Index i = 0; i < p.rank(); ++i) EXPECT_LE(std::abs(x.dot(p.basis().col(i))), 1e-9 * y.norm());
}

TEST(Container, RoundTripAndHeader) {
  std::mt19937_64 rng(21);
  const Matrix m = oracle::random_matrix(rng, 3, 5);
  const auto bytes = serialize_dense(m);
  ASSERT_EQ(bytes.size(), 16u + 8u * 15u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EQLM");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 5);
  std::size_t used = 0;
  EXPECT_EQ(deserialize_dense(bytes, &used), m);
  EXPECT_EQ(used, bytes.size());
  // row-major payload: second value is m(0, 1)
  double second = 0.0;
  std::memcpy(&second, bytes.data() + 24, 8);
  EXPECT_EQ(second, m(0, 1));
}

TEST(Container, ParseErrorsCarryOffsets) {
  auto bytes = serialize_dense(Matrix::Ones(2, 2));
  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  EXPECT_THROW(deserialize_dense(bad_magic), ParseError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize_dense(bad_version), ParseError);
  bytes.resize(bytes.size() - 3);
  try {
    deserialize_dense(bytes);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
}

TEST(Container, FileRoundTrip) {
  std::mt19937_64 rng(22);
  const LinearMap a = LinearMap::dense(oracle::random_matrix(rng, 4, 6));
  const auto path = std::filesystem::temp_directory_path() / "eqreg_linops_roundtrip.eqlm";
  save_dense_map(a, path);
  const LinearMap b = load_dense_map(path);
  EXPECT_EQ(a.to_dense(), b.to_dense());
  std::filesystem::remove(path);
  EXPECT_THROW(load_dense_map(path), Error);
}

}  // namespace

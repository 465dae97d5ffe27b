#include "eqreg/regularizers.hpp"

#include "eqreg/kernels.hpp"
#include "eqreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace eqreg {

namespace {

// Composite norms this close to 1 are indistinguishable from 1 in double
// precision and are rejected.
constexpr double kContractivityCeiling = 1.0 - 1e-12;

void require_contractive(double l, const char* what) {
  if (!(l >= 0.0) || l >= kContractivityCeiling)
    throw ContractivityViolation(std::string(what) + ": residual Lipschitz bound " +
                                     std::to_string(l) + " is not < 1",
                                 l);
}

void require_dim(Index got, Index want, const char* what) {
  if (got != want)
    throw InvalidArgument(std::string(what) + ": dimension " + std::to_string(got) +
                          " does not match " + std::to_string(want));
}

}  // namespace

const char* to_string(RegForm form) {
  switch (form) {
    case RegForm::kIdentity:
      return "identity";
    case RegForm::kLinear:
      return "linear";
    case RegForm::kKernelResidual:
      return "kernel-residual";
    case RegForm::kCustom:
      return "custom";
  }
  return "unknown";
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

RegOperator RegOperator::identity(Index dim) {
  if (dim <= 0) throw InvalidArgument("regularizer dimension must be positive");
  RegOperator g;
  g.dim_ = dim;
  g.form_ = RegForm::kIdentity;
  g.lipschitz_ = 0.0;
  return g;
}

RegOperator RegOperator::linear(Matrix w) {
  if (w.rows() != w.cols() || w.rows() == 0)
    throw InvalidArgument("linear residual must be a nonempty square matrix");
  const double l = spectral_norm(w);
  require_contractive(l, "RegOperator::linear");
  RegOperator g;
  g.dim_ = w.rows();
  g.form_ = RegForm::kLinear;
  g.lipschitz_ = l;
  g.w_ = std::move(w);
  return g;
}

RegOperator RegOperator::kernel_residual(Matrix w, double lipschitz) {
  if (w.rows() != w.cols() || w.rows() == 0)
    throw InvalidArgument("kernel residual must be a nonempty square matrix");
  require_contractive(lipschitz, "RegOperator::kernel_residual");
  RegOperator g;
  g.dim_ = w.rows();
  g.form_ = RegForm::kKernelResidual;
  g.lipschitz_ = lipschitz;
  g.w_ = std::move(w);
  return g;
}

RegOperator RegOperator::custom(Index dim, ResidualFn residual, double declared_lipschitz,
                                RegForm form) {
  if (dim <= 0) throw InvalidArgument("regularizer dimension must be positive");
  if (!residual) throw InvalidArgument("custom regularizer needs a residual callable");
  if (form != RegForm::kCustom && form != RegForm::kKernelResidual)
    throw InvalidArgument("callable residuals are tagged custom or kernel-residual");
  require_contractive(declared_lipschitz, "RegOperator::custom");
  RegOperator g;
  g.dim_ = dim;
  g.form_ = form;
  g.lipschitz_ = declared_lipschitz;
  g.residual_fn_ = std::move(residual);
  return g;
}

Matrix RegOperator::residual_matrix() const {
  if (residual_fn_) throw InvalidArgument("residual_matrix() requires a linear regularizer");
  if (form_ == RegForm::kIdentity) return Matrix::Zero(dim_, dim_);
  return w_;
}

Vector RegOperator::residual(const Vector& x) const {
  require_dim(x.size(), dim_, "RegOperator::residual");
  if (residual_fn_) return residual_fn_(x);
  if (form_ == RegForm::kIdentity) return Vector::Zero(dim_);
  Vector out(dim_);
  kernels::omp::gemv(w_, {x.data(), static_cast<std::size_t>(dim_)},
                     {out.data(), static_cast<std::size_t>(dim_)});
  return out;
}

Vector RegOperator::apply(const Vector& x) const {
  if (form_ == RegForm::kIdentity) {
    require_dim(x.size(), dim_, "RegOperator::apply");
    return x;
  }
  return x - residual(x);
}

RegOperator RegOperator::with_lipschitz_bound(double lipschitz) const {
  RegOperator g = *this;
  g.lipschitz_ = lipschitz;
  return g;
}

RegOperator make_subspace_reg(const KernelProjector& pker, const SubspaceProjector& pv) {
  require_dim(pv.dim(), pker.dim(), "make_subspace_reg");
  const Index d = pker.dim();
  if (pker.rank() == 0 || pv.q() == 0) return RegOperator::kernel_residual(Matrix::Zero(d, d), 0.0);
  // ||P_ker P_V|| = ||B_ker^T B_V||_2 for orthonormal bases
  const Matrix cross = pker.basis().transpose() * pv.basis;
  const double l = spectral_norm(cross);
  if (l >= kContractivityCeiling)
    throw ContractivityViolation("make_subspace_reg: ||P_ker P_V|| = " + std::to_string(l) +
                                     " is not < 1; reduce q",
                                 l);
  Matrix w = pker.basis() * cross * pv.basis.transpose();
  return RegOperator::kernel_residual(std::move(w), l);
}

int inversion_budget(double lipschitz, double tol, double v_norm) {
  constexpr int kCap = 1'000'000;
  if (lipschitz <= 0.0) return 51;
  const double steps = std::ceil(std::log(tol / (2.0 * v_norm + 1.0)) / std::log(lipschitz));
  if (!std::isfinite(steps) || steps + 50.0 >= kCap) return kCap;
  return static_cast<int>(std::max(0.0, steps)) + 50;
}

InverseResult invert_reg(const RegOperator& g, const Vector& v, double tol) {
  require_dim(v.size(), g.dim(), "invert_reg");
  if (!(tol > 0.0)) throw InvalidArgument("invert_reg: tol must be positive");
  if (!(g.lipschitz_bound() < 1.0)) throw ContractivityViolation("invert_reg: L >= 1", g.lipschitz_bound());

  InverseResult out;
  if (g.form() == RegForm::kIdentity) {
    out.x = v;
    out.converged = true;
    return out;
  }
  if (g.is_linear()) {
    const Matrix system = Matrix::Identity(g.dim(), g.dim()) - g.residual_matrix();
    const Eigen::PartialPivLU<Matrix> lu(system);
    out.x = lu.solve(v);
    Vector defect = v - g.apply(out.x);
    out.x += lu.solve(defect);  // one step of iterative refinement
    out.residual = (g.apply(out.x) - v).norm();
    out.converged = out.residual <= tol;
    return out;
  }

  const int budget = inversion_budget(g.lipschitz_bound(), tol, v.norm());
  Vector x = v;
  for (int it = 1; it <= budget; ++it) {
    Vector next = v + g.residual(x);
    // G(x) - v = x - next
    const double defect = (x - next).norm();
    out.iterations = it;
    x = std::move(next);
    if (defect <= tol) break;
  }
  out.x = std::move(x);
  out.residual = (g.apply(out.x) - v).norm();
  out.converged = out.residual <= tol;
  return out;
}

BregmanValue sym_bregman(const RegOperator& g, const Vector& x, const Vector& z) {
  require_dim(x.size(), g.dim(), "sym_bregman");
  require_dim(z.size(), g.dim(), "sym_bregman");
  const double inner = (g.apply(x) - g.apply(z)).dot(x - z);
  return {std::abs(inner), inner};
}

double EquivalenceReport::worst() const {
  return std::min({upper_margin, lower_margin, inverse_lip_margin, certificate_margin});
}

EquivalenceReport equivalence_check(const RegOperator& g, int trials, std::uint64_t seed,
                                    double slack) {
  if (trials <= 0) throw InvalidArgument("equivalence_check: trials must be positive");
  const double l = g.lipschitz_bound();
  if (!(l < 1.0)) throw ContractivityViolation("equivalence_check: L >= 1", l);

  EquivalenceReport rep;
  rep.slack = slack;
  rep.upper_margin = rep.lower_margin = rep.inverse_lip_margin = rep.certificate_margin =
      std::numeric_limits<double>::infinity();

  auto probe = [&](const Vector& x, const Vector& z) {
    const Vector d = x - z;
    const double dn2 = d.squaredNorm();
    if (dn2 == 0.0) return;
    const Vector gx = g.apply(x);
    const Vector gz = g.apply(z);
    const Vector dg = gx - gz;
    const Vector dres = (x - gx) - (z - gz);
    const double inner = dg.dot(d) / dn2;
    const double dn = std::sqrt(dn2);
    rep.upper_margin = std::min(rep.upper_margin, (1.0 + l) - inner);
    rep.lower_margin = std::min(rep.lower_margin, inner - (1.0 - l));
    rep.inverse_lip_margin = std::min(rep.inverse_lip_margin, dg.norm() / dn - (1.0 - l));
    rep.certificate_margin = std::min(rep.certificate_margin, l - dres.norm() / dn);
    ++rep.pairs;
  };

  Rng rng(seed);
  const double scales[] = {0.1, 1.0, 10.0};
  for (int t = 0; t < trials; ++t) {
    const double s = scales[t % 3];
    const Vector x = s * gaussian_vector(rng, g.dim());
    const Vector z = s * gaussian_vector(rng, g.dim());
    probe(x, z);
  }

  if (g.is_linear() && g.form() != RegForm::kIdentity) {
    // extremal directions: leading right singular vectors of W and leading
    // eigenvectors of its symmetric part
    const Matrix w = g.residual_matrix();
    Eigen::BDCSVD<Matrix> svd(w, Eigen::ComputeThinV);
    const Matrix sym = 0.5 * (w + w.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Index k = std::min<Index>(3, g.dim());
    const Vector base = gaussian_vector(rng, g.dim());
    for (Index i = 0; i < k; ++i) {
      probe(base, base - Vector(svd.matrixV().col(i)));
      probe(base, base - Vector(eig.eigenvectors().col(g.dim() - 1 - i)));
    }
  }

  rep.passed = rep.pairs > 0 && rep.worst() >= -slack;
  return rep;
}

RecoverabilityResult recoverability_constant(const Dataset& dataset, const KernelProjector& pker,
                                             std::uint64_t seed) {
  require_dim(dataset.dim(), pker.dim(), "recoverability_constant");
  if (dataset.size() < 2) throw InvalidArgument("recoverability_constant needs at least 2 points");
  const Matrix coords = pker.basis().transpose() * dataset.samples();

  RecoverabilityResult out;
  kernels::PairRatio pr;
  if (dataset.size() <= kExhaustivePairLimit) {
    pr = kernels::omp::pair_ratio_all(dataset.samples(), coords);
  } else {
    out.exhaustive = false;
    Rng rng(seed);
    std::uniform_int_distribution<Index> pick(0, dataset.size() - 1);
    std::vector<std::pair<Index, Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(kSampledPairs));
    while (static_cast<std::int64_t>(pairs.size()) < kSampledPairs) {
      const Index i = pick(rng);
      const Index j = pick(rng);
      if (i != j) pairs.emplace_back(i, j);
    }
    pr = kernels::omp::pair_ratio_listed(dataset.samples(), coords, pairs);
  }
  if (pr.pairs == 0) throw UndefinedQuantity("recoverability_constant: all points coincide");
  out.value = pr.max_ratio;
  out.pairs = pr.pairs;
  return out;
}

double loss_value(const RegOperator& g, const Dataset& dataset, const KernelProjector& pker,
                  double lambda) {
  if (dataset.empty()) throw InvalidArgument("loss_value: empty dataset");
  if (lambda < 0.0) throw InvalidArgument("loss_value: lambda must be >= 0");
  require_dim(dataset.dim(), g.dim(), "loss_value");
  require_dim(pker.dim(), g.dim(), "loss_value");
  const Index n = dataset.size();
  std::vector<double> terms(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const Vector gx = g.apply(dataset.samples().col(i));
    const double ker = pker.rank() == 0 ? 0.0 : pker.coordinates(gx).squaredNorm();
    terms[static_cast<std::size_t>(i)] = ker + lambda * gx.squaredNorm();
  }
  double sum = 0.0;
  for (const double t : terms) sum += t;
  return sum / static_cast<double>(n);
}

double lower_bound_error(const RegOperator& g, const Vector& x, double alpha, double norm_a) {
  if (!(alpha > 0.0)) throw InvalidArgument("lower_bound_error: alpha must be positive");
  return alpha * g.apply(x).norm() / (norm_a * norm_a + alpha * (1.0 + g.lipschitz_bound()));
}

std::vector<std::uint8_t> serialize_reg(const RegOperator& g) {
  if (!g.is_linear()) throw InvalidArgument("only linear regularizers can be serialized");
  auto bytes = serialize_dense(g.residual_matrix());
  bytes.push_back(static_cast<std::uint8_t>(g.form()));
  std::uint64_t bits = 0;
  const double l = g.lipschitz_bound();
  std::memcpy(&bits, &l, sizeof bits);
  for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  return bytes;
}

RegOperator deserialize_reg(std::span<const std::uint8_t> bytes) {
  std::size_t at = 0;
  Matrix w = deserialize_dense(bytes, &at);
  if (bytes.size() < at + 9) throw ParseError("regularizer trailer truncated", bytes.size());
  const auto form = static_cast<RegForm>(bytes[at]);
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[at + 1 + b]) << (8 * b);
  double l = 0.0;
  std::memcpy(&l, &bits, sizeof l);
  if (w.rows() != w.cols()) throw ParseError("regularizer payload is not square", 8);

  switch (form) {
    case RegForm::kIdentity:
      return RegOperator::identity(w.rows()).with_lipschitz_bound(l);
    case RegForm::kLinear:
      return RegOperator::linear(std::move(w)).with_lipschitz_bound(l);
    case RegForm::kKernelResidual:
      // the stored certificate is taken as is; verify with equivalence_check
      if (!(l >= 0.0) || l >= 1.0) throw ContractivityViolation("stored certificate is not < 1", l);
      return RegOperator::kernel_residual(std::move(w), 0.0).with_lipschitz_bound(l);
    default:
      throw ParseError("unknown regularizer form tag " + std::to_string(bytes[at]), at);
  }
}

void save_reg(const RegOperator& g, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_reg(g));
}

RegOperator load_reg(const std::filesystem::path& path) { return deserialize_reg(read_file_bytes(path)); }

}  // namespace eqreg

#include "eqreg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eqreg {

namespace {

void validate(const EquilibriumProblem& p) {
  if (!(p.alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (p.reg.dim() != p.forward.in_dim())
    throw InvalidArgument("regularizer dim " + std::to_string(p.reg.dim()) +
                          " does not match operator input dim " +
                          std::to_string(p.forward.in_dim()));
  if (p.data.size() != p.forward.out_dim())
    throw InvalidArgument("data length " + std::to_string(p.data.size()) +
                          " does not match operator output dim " +
                          std::to_string(p.forward.out_dim()));
}

double resolve_norm(const LinearMap& forward, const std::optional<double>& given) {
  return given ? *given : norm_upper_estimate(forward);
}

double gamma_bound(double alpha, double beta, double l) {
  return 1.0 - alpha * beta * (1.0 - l);
}

Matrix system_matrix(const LinearMap& forward, const RegOperator& reg, double alpha) {
  const Matrix a = forward.to_dense();
  Matrix k = a.transpose() * a;
  k.diagonal().array() += alpha;
  if (reg.form() != RegForm::kIdentity) k -= alpha * reg.residual_matrix();
  return k;
}

SolveReport solve_stepwise(const EquilibriumProblem& p, const SolverConfig& cfg, double beta,
                           double gamma) {
  SolveReport rep;
  rep.beta = beta;
  rep.contraction_bound = gamma;
  Vector x = cfg.x0 ? *cfg.x0 : Vector::Zero(p.forward.in_dim());
  Vector r = residual_T(p, x);
  double rn = r.norm();
  rep.initial_residual = rn;
  std::int64_t n = 0;
  while (rn > cfg.tol && n < cfg.max_iter) {
    x -= beta * r;
    r = residual_T(p, x);
    const double next = r.norm();
    if (rn > 0.0) rep.contraction_estimate = std::max(rep.contraction_estimate, next / rn);
    rn = next;
    ++n;
  }
  rep.x = std::move(x);
  rep.iterations = n;
  rep.residual_norm = rn;
  rep.converged = rn <= cfg.tol;
  return rep;
}

}  // namespace

double norm_upper_estimate(const LinearMap& forward) {
  // power iteration approaches ||A|| from below
  return operator_norm(forward).value * (1.0 + 1e-9);
}

Vector residual_T(const EquilibriumProblem& p, const Vector& x) {
  validate(p);
  return p.forward.adjoint(p.forward.apply(x) - p.data) + p.alpha * p.reg.apply(x);
}

LinearFixedPointSolver::LinearFixedPointSolver(const LinearMap& forward, const RegOperator& reg,
                                               double alpha, double beta)
    : forward_(forward), reg_(reg), alpha_(alpha), beta_(beta) {
  if (!reg.is_linear()) throw InvalidArgument("LinearFixedPointSolver requires a linear G");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw InvalidArgument("alpha and beta must be positive");
  if (forward.in_dim() > kMaxDenseSide || forward.out_dim() > kMaxDenseSide)
    throw ResourceLimit("LinearFixedPointSolver: operator exceeds the dense limit");
  gamma_ = gamma_bound(alpha, beta, reg.lipschitz_bound());
  system_ = system_matrix(forward, reg, alpha);
  lu_.compute(system_);
  Matrix m = -beta * system_;
  m.diagonal().array() += 1.0;
  powers_.push_back(std::move(m));
}

void LinearFixedPointSolver::grow_powers() {
  const Matrix& last = powers_.back();
  powers_.push_back(last * last);
}

Vector LinearFixedPointSolver::residual(const Vector& x, const Vector& b) const {
  return forward_.adjoint(forward_.apply(x)) + alpha_ * reg_.apply(x) - b;
}

SolveReport LinearFixedPointSolver::solve(const Vector& y, double tol, std::int64_t max_iter,
                                          const std::optional<Vector>& x0) {
  if (y.size() != forward_.out_dim()) throw InvalidArgument("data length mismatch");
  SolveReport rep;
  rep.beta = beta_;
  rep.contraction_bound = gamma_;

  const Vector b = forward_.adjoint(y);
  Vector x = x0 ? *x0 : Vector::Zero(forward_.in_dim());
  const Vector r0 = residual(x, b);
  const double r0n = r0.norm();
  rep.initial_residual = r0n;

  std::int64_t n = 0;
  Vector r = r0;
  if (r0n > tol && max_iter > 0) {
    // smallest t with ||M^(2^t) r0|| <= tol, or 2^t >= max_iter
    std::size_t t = 0;
    while (true) {
      if (t >= powers_.size()) grow_powers();
      if ((powers_[t] * r0).norm() <= tol) break;
      if ((std::int64_t{1} << t) >= max_iter || t >= 62) break;
      ++t;
    }
    const std::int64_t cap = std::min<std::int64_t>(std::int64_t{1} << t, max_iter);
    // largest m < cap with ||r_m|| > tol; residual norms are nonincreasing
    Vector v = r0;
    for (std::size_t j = t; j-- > 0;) {
      const std::int64_t step = std::int64_t{1} << j;
      if (n + step >= cap) continue;
      Vector w = powers_[j] * v;
      if (w.norm() > tol) {
        v = std::move(w);
        n += step;
      }
    }
    r = powers_[0] * v;
    ++n;
    x = lu_.solve(b + r);
  }

  // The proxy r_n and the recomputed residual differ by rounding only; a few
  // plain steps absorb that difference.
  Vector actual = residual(x, b);
  double an = actual.norm();
  for (int polish = 0; an > tol && polish < 1000 && n < max_iter; ++polish, ++n) {
    x -= beta_ * actual;
    actual = residual(x, b);
    an = actual.norm();
  }

  rep.x = std::move(x);
  rep.iterations = n;
  rep.residual_norm = an;
  rep.converged = an <= tol;
  if (n > 0 && r0n > 0.0 && an > 0.0)
    rep.contraction_estimate = std::exp(std::log(an / r0n) / static_cast<double>(n));
  return rep;
}

SolveReport solve_fixed_point(const EquilibriumProblem& p, const SolverConfig& cfg) {
  validate(p);
  if (!(cfg.tol > 0.0)) throw InvalidArgument("solver tol must be positive");
  if (cfg.max_iter < 0) throw InvalidArgument("max_iter must be >= 0");
  const double l = p.reg.lipschitz_bound();
  if (!(l < 1.0)) throw ContractivityViolation("solve_fixed_point: L >= 1", l);
  if (cfg.x0 && cfg.x0->size() != p.forward.in_dim()) throw InvalidArgument("x0 length mismatch");

  const double norm_a = resolve_norm(p.forward, cfg.norm_a);
  const double beta_max = max_step(norm_a, p.alpha);
  const double beta = cfg.beta.value_or(beta_max);
  if (!(beta > 0.0) || beta > beta_max * (1.0 + 1e-12))
    throw InvalidArgument("beta = " + std::to_string(beta) + " outside (0, 1/(||A||^2 + alpha)] = (0, " +
                          std::to_string(beta_max) + "]");
  const double gamma = gamma_bound(p.alpha, beta, l);

  bool doubling = false;
  switch (cfg.engine) {
    case FixedPointEngine::kStepwise:
      break;
    case FixedPointEngine::kDoubling:
      if (!p.reg.is_linear()) throw InvalidArgument("doubling engine requires a linear G");
      doubling = true;
      break;
    case FixedPointEngine::kAuto:
      doubling = p.reg.is_linear() && p.forward.in_dim() <= kMaxDenseSide &&
                 p.forward.out_dim() <= kMaxDenseSide;
      break;
  }
  if (!doubling) return solve_stepwise(p, cfg, beta, gamma);
  LinearFixedPointSolver solver(p.forward, p.reg, p.alpha, beta);
  return solver.solve(p.data, cfg.tol, cfg.max_iter, cfg.x0);
}

Vector solve_direct_linear(const EquilibriumProblem& p) {
  validate(p);
  if (!p.reg.is_linear()) throw InvalidArgument("solve_direct_linear requires a linear G");
  const Matrix k = system_matrix(p.forward, p.reg, p.alpha);
  const Vector b = p.forward.adjoint(p.data);
  return Eigen::PartialPivLU<Matrix>(k).solve(b);
}

LimitingSolution solve_limiting(const LinearMap& forward, const RegOperator& reg, const Vector& y,
                                const SpectralDecomposition& decomp, double tol, double threshold) {
  if (reg.dim() != forward.in_dim()) throw InvalidArgument("regularizer/operator dim mismatch");
  if (y.size() != forward.out_dim()) throw InvalidArgument("data length mismatch");
  if (decomp.in_dim != forward.in_dim() || decomp.out_dim != forward.out_dim())
    throw InvalidArgument("decomposition does not match the operator");
  if (!(reg.lipschitz_bound() < 1.0))
    throw ContractivityViolation("solve_limiting: L >= 1", reg.lipschitz_bound());

  LimitingSolution out;
  const Vector x_part = pseudo_apply(decomp, y, threshold);
  out.range_defect = (forward.apply(x_part) - y).norm();
  if (out.range_defect > 1e-8 * std::max(1.0, y.norm()))
    throw InvalidArgument("solve_limiting: data not in ran(A), range defect " +
                          std::to_string(out.range_defect));

  const KernelProjector pker = kernel_projector(decomp, threshold);
  const Matrix& basis = pker.basis();
  Vector coords = Vector::Zero(pker.rank());
  if (pker.rank() > 0) {
    if (reg.is_linear()) {
      // B^T (I - W) (x_part + B c) = 0  <=>  (I - B^T W B) c = -B^T (I - W) x_part
      const Matrix w = reg.residual_matrix();
      Matrix lhs = -(basis.transpose() * w * basis);
      lhs.diagonal().array() += 1.0;
      const Vector rhs = -(basis.transpose() * reg.apply(x_part));
      coords = Eigen::PartialPivLU<Matrix>(lhs).solve(rhs);
    } else {
      const int budget = inversion_budget(reg.lipschitz_bound(), tol, x_part.norm());
      for (int it = 1; it <= budget; ++it) {
        Vector next = basis.transpose() * reg.residual(x_part + basis * coords);
        const double change = (next - coords).norm();
        coords = std::move(next);
        out.iterations = it;
        if (change <= tol) break;
      }
    }
  }
  out.x = pker.rank() > 0 ? Vector(x_part + basis * coords) : x_part;
  out.data_residual = (forward.apply(out.x) - y).norm();
  out.kernel_defect = pker.rank() > 0 ? pker.coordinates(reg.apply(out.x)).norm() : 0.0;
  return out;
}

Vector nullspace_oracle(const LinearMap& forward, const RegOperator& reg, double alpha,
                        const Vector& y) {
  if (reg.form() != RegForm::kKernelResidual && reg.form() != RegForm::kIdentity)
    throw InvalidArgument(std::string("nullspace_oracle needs a kernel-residual G, got ") +
                          to_string(reg.form()));
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (y.size() != forward.out_dim()) throw InvalidArgument("data length mismatch");
  const Matrix a = forward.to_dense();
  Matrix normal = a.transpose() * a;
  normal.diagonal().array() += alpha;
  const Vector tikhonov = normal.llt().solve(forward.adjoint(y));
  return invert_reg(reg, tikhonov, 1e-13 * std::max(1.0, tikhonov.norm())).x;
}

std::int64_t predict_iterations(double delta, double alpha, double lipschitz, double norm_a,
                                double target, double c0) {
  if (!(delta > 0.0) || !(alpha > 0.0) || !(norm_a > 0.0) || !(target > 0.0) || !(c0 > 0.0))
    throw InvalidArgument("predict_iterations: arguments must be positive");
  if (!(lipschitz >= 0.0 && lipschitz < 1.0))
    throw InvalidArgument("predict_iterations: L must lie in [0, 1)");
  if (target >= c0) return 0;
  const double beta = max_step(norm_a, alpha);
  const double log_gamma = std::log1p(-alpha * beta * (1.0 - lipschitz));
  return static_cast<std::int64_t>(std::ceil(std::log(target / c0) / log_gamma));
}

}  // namespace eqreg

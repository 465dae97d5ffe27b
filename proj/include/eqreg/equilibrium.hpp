#pragma once

#include "eqreg/linops.hpp"
#include "eqreg/regularizers.hpp"
#include "eqreg/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace eqreg {

/// One instance of A^T (A x - y) + alpha G(x) = 0. Holds references; the
/// operator and regularizer must outlive the problem.
struct EquilibriumProblem {
  const LinearMap& forward;
  const RegOperator& reg;
  double alpha;
  Vector data;
};

enum class FixedPointEngine : std::uint8_t {
  kAuto,      // doubling for linear G that fits the dense limit, else stepwise
  kStepwise,  // one application of x <- x - beta T(x) per iteration
  kDoubling,  // same iterates for linear G, reached by repeated squaring
};

struct SolverConfig {
  std::optional<double> beta;    // default 1 / (||A||^2 + alpha)
  double tol = 1e-10;            // stop once ||T(x)|| <= tol
  std::int64_t max_iter = 100'000'000;
  std::optional<Vector> x0;      // default zero
  std::optional<double> norm_a;  // estimated by power iteration when absent
  FixedPointEngine engine = FixedPointEngine::kAuto;
};

struct SolveReport {
  Vector x;
  std::int64_t iterations = 0;
  double residual_norm = 0.0;   // ||T(x)||
  double initial_residual = 0.0;
  bool converged = false;
  double contraction_estimate = 0.0;  // measured per-step residual ratio
  double contraction_bound = 0.0;     // 1 - alpha beta (1 - L)
  double beta = 0.0;
};

/// T(x) = A^T (A x - y) + alpha G(x)
Vector residual_T(const EquilibriumProblem& problem, const Vector& x);

/// Damped fixed-point iteration x <- x - beta T(x). Exhausting max_iter gives
/// an unconverged report, not an exception.
SolveReport solve_fixed_point(const EquilibriumProblem& problem, const SolverConfig& config = {});

/// Runs the fixed-point iteration for linear G = I - W by repeated squaring of
/// the iteration matrix M = I - beta K, K = A^T A + alpha (I - W).
///
/// Because ||M|| <= 1 - alpha beta (1 - L) the residual norms r_n = M^n r_0
/// are nonincreasing, so the first n with ||r_n|| <= tol is found by a binary
/// descent over the powers M^(2^j). The iterate is then x_n = K^{-1}(A^T y + r_n).
/// Powers depend on (A, G, alpha, beta) only and are reused across data.
/// Not thread-safe: powers are grown lazily.
class LinearFixedPointSolver {
 public:
  LinearFixedPointSolver(const LinearMap& forward, const RegOperator& reg, double alpha,
                         double beta);

  SolveReport solve(const Vector& y, double tol, std::int64_t max_iter,
                    const std::optional<Vector>& x0 = {});

  double beta() const { return beta_; }
  double contraction_bound() const { return gamma_; }

 private:
  void grow_powers();
  Vector residual(const Vector& x, const Vector& b) const;  // K x - b, matrix-free

  const LinearMap& forward_;
  const RegOperator& reg_;
  double alpha_;
  double beta_;
  double gamma_;
  Matrix system_;  // K
  Eigen::PartialPivLU<Matrix> lu_;
  std::vector<Matrix> powers_;  // powers_[j] = M^(2^j)
};

/// Solves (A^T A + alpha (I - W)) x = A^T y by dense LU. Requires linear G.
Vector solve_direct_linear(const EquilibriumProblem& problem);

struct LimitingSolution {
  Vector x;
  double range_defect = 0.0;   // ||A A^+ y - y||
  double data_residual = 0.0;  // ||A x - y||
  double kernel_defect = 0.0;  // ||P_ker G(x)||
  int iterations = 0;
};

/// Solution of A x = y, G(x) in ker(A)^perp: x = A^+ y + z0 with z0 in ker(A).
/// z0 is found in kernel-basis coordinates, by a direct solve for linear G and
/// by the contraction z0 <- P_ker N(A^+ y + z0) otherwise. Throws
/// InvalidArgument when y is not in ran(A) to 1e-8 (relative).
LimitingSolution solve_limiting(const LinearMap& forward, const RegOperator& reg, const Vector& y,
                                const SpectralDecomposition& decomp, double tol = 1e-12,
                                double threshold = kDefaultSvdCutoff);

/// G^{-1} applied to the Tikhonov solution (A^T A + alpha I)^{-1} A^T y.
/// Requires a kernel-residual G; agrees with the equilibrium solution.
Vector nullspace_oracle(const LinearMap& forward, const RegOperator& reg, double alpha,
                        const Vector& y);

/// Smallest n with c0 gamma^n <= target, gamma = 1 - alpha beta (1 - L),
/// beta = 1 / (norm_a^2 + alpha). Scales like log(delta) / ((1 - L) delta)
/// when alpha = delta and target ~ delta^{3/2}.
std::int64_t predict_iterations(double delta, double alpha, double lipschitz, double norm_a,
                                double target, double c0);

/// Power-iteration estimate of ||A|| nudged upward by 1e-9 relative, so that
/// the default step stays inside the admissible range.
double norm_upper_estimate(const LinearMap& forward);

/// 1 / (||A||^2 + alpha)
inline double max_step(double norm_a, double alpha) { return 1.0 / (norm_a * norm_a + alpha); }

}  // namespace eqreg

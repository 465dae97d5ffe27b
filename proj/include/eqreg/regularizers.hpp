#pragma once

#include "eqreg/dataset.hpp"
#include "eqreg/linops.hpp"
#include "eqreg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace eqreg {

enum class RegForm : std::uint8_t {
  kIdentity = 0,
  kLinear = 1,
  kKernelResidual = 2,  // N = P_ker(A) o M, range of N inside ker(A)
  kCustom = 3,
};

const char* to_string(RegForm form);

using ResidualFn = std::function<Vector(const Vector&)>;

/// Regularization operator G = id - N whose residual N has Lipschitz
/// constant L < 1.
///
/// Linear residuals are stored as a dense matrix W and certified by their
/// exact spectral norm at construction. Nonlinear residuals come with a
/// declared bound that equivalence_check() can falsify by sampling.
class RegOperator {
 public:
  static RegOperator identity(Index dim);

  /// G = id - W. Throws ContractivityViolation if ||W|| >= 1.
  static RegOperator linear(Matrix w);

  /// G = id - W where W already maps into ker(A); `lipschitz` must be ||W||.
  static RegOperator kernel_residual(Matrix w, double lipschitz);

  /// Nonlinear residual with a user-declared Lipschitz bound in [0, 1).
  static RegOperator custom(Index dim, ResidualFn residual, double declared_lipschitz,
                            RegForm form = RegForm::kCustom);

  Index dim() const { return dim_; }
  RegForm form() const { return form_; }
  double lipschitz_bound() const { return lipschitz_; }
  bool is_linear() const { return !residual_fn_; }

  /// W for linear forms (zero matrix for the identity). Throws for custom.
  Matrix residual_matrix() const;

  /// N(x)
  Vector residual(const Vector& x) const;
  /// G(x) = x - N(x)
  Vector apply(const Vector& x) const;

  /// Copy with a replaced certificate. No re-verification; used for loading
  /// artifacts and for fault injection in tests.
  RegOperator with_lipschitz_bound(double lipschitz) const;

 private:
  RegOperator() = default;

  Index dim_ = 0;
  RegForm form_ = RegForm::kIdentity;
  double lipschitz_ = 0.0;
  Matrix w_;  // empty for identity and custom
  ResidualFn residual_fn_;
};

/// Spectral norm of a dense matrix via SVD.
double spectral_norm(const Matrix& m);

/// G = id - P_ker P_V. The certificate is ||P_ker P_V||, the largest cosine
/// between the two subspaces.
RegOperator make_subspace_reg(const KernelProjector& pker, const SubspaceProjector& pv);

inline Vector apply_reg(const RegOperator& g, const Vector& x) { return g.apply(x); }

struct InverseResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  // ||G(x) - v||
  bool converged = false;
};

/// Solves G(x) = v. Linear forms use a direct solve of (I - W) x = v; other
/// forms use the Banach iteration x <- v + N(x).
InverseResult invert_reg(const RegOperator& g, const Vector& v, double tol = 1e-12);

/// Iteration budget of the Banach inversion for a given ||v||.
int inversion_budget(double lipschitz, double tol, double v_norm);

struct BregmanValue {
  double value = 0.0;         // |<G(x) - G(z), x - z>|
  double signed_inner = 0.0;  // <G(x) - G(z), x - z>
};

BregmanValue sym_bregman(const RegOperator& g, const Vector& x, const Vector& z);

struct EquivalenceReport {
  int pairs = 0;
  // Each margin is the worst value over all pairs of the corresponding
  // inequality, normalised by ||x - z||^2 (or ||x - z|| for norms).
  double upper_margin = 0.0;      // (1+L) - <dG, d>/|d|^2
  double lower_margin = 0.0;      // <dG, d>/|d|^2 - (1-L)
  double inverse_lip_margin = 0.0;  // |dG|/|d| - (1-L)
  double certificate_margin = 0.0;  // L - |dN|/|d|
  double slack = 1e-9;
  bool passed = false;

  double worst() const;
};

/// Checks (1-L)|d|^2 <= <G(x)-G(z), d> <= (1+L)|d|^2, |G(x)-G(z)| >= (1-L)|d|
/// and |N(x)-N(z)| <= L|d| on seeded random pairs. Linear forms are also
/// probed along the leading singular directions of W.
EquivalenceReport equivalence_check(const RegOperator& g, int trials, std::uint64_t seed,
                                    double slack = 1e-9);

struct RecoverabilityResult {
  double value = 0.0;
  std::int64_t pairs = 0;
  bool exhaustive = true;  // false: sampled, so a lower bound on the supremum
};

inline constexpr Index kExhaustivePairLimit = 2000;
inline constexpr std::int64_t kSampledPairs = 2'000'000;

/// sup over pairs of ||P_ker(x1 - x2)|| / ||x1 - x2||.
RecoverabilityResult recoverability_constant(const Dataset& dataset, const KernelProjector& pker,
                                             std::uint64_t seed = 0);

/// Empirical mean of ||P_ker G(x)||^2 + lambda ||G(x)||^2.
double loss_value(const RegOperator& g, const Dataset& dataset, const KernelProjector& pker,
                  double lambda = 0.0);

/// alpha ||G(x)|| / (||A||^2 + alpha (1 + L)), a lower bound on ||x - R_alpha A x||.
double lower_bound_error(const RegOperator& g, const Vector& x, double alpha, double norm_a);

// Linear operators share the dense map container; the residual matrix W is
// the payload, followed by one form-tag byte and the f64 certificate.
std::vector<std::uint8_t> serialize_reg(const RegOperator& g);
RegOperator deserialize_reg(std::span<const std::uint8_t> bytes);
void save_reg(const RegOperator& g, const std::filesystem::path& path);
RegOperator load_reg(const std::filesystem::path& path);

}  // namespace eqreg

#pragma once

#include "eqreg/dataset.hpp"
#include "eqreg/equilibrium.hpp"
#include "eqreg/linops.hpp"
#include "eqreg/regularizers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eqreg {

/// Gaussian noise rescaled to an exact norm.
struct NoiseSpec {
  double target_delta = 0.0;
  std::uint64_t seed = 0;
};

/// y + delta g / ||g|| with g standard Gaussian drawn from `seed`.
Vector add_noise(const Vector& y, const NoiseSpec& spec);

struct RateRow {
  double delta = 0.0;
  double alpha = 0.0;
  double residual = 0.0;    // ||A x_alpha - y_delta||
  double bregman = 0.0;     // D_G(x_alpha, x+)
  double norm_error = 0.0;  // ||x_alpha - x+||
  std::int64_t iterations = 0;
  double accuracy = 0.0;  // solver tolerance on ||T||
  bool converged = false;
  // not part of the CSV
  std::int64_t predicted_iterations = 0;
  double initial_residual = 0.0;
};

struct RateMetadata {
  std::uint64_t seed = 0;
  std::string operator_tag;
  Index q = 0;
  double lipschitz = 0.0;
  std::string tol_rule;
};

struct RateTable {
  std::vector<RateRow> rows;
  RateMetadata meta;
};

enum class RateColumn : std::uint8_t { kResidual, kBregman, kNormError, kIterations };

const char* to_string(RateColumn column);
std::optional<RateColumn> parse_rate_column(const std::string& name);
double column_value(const RateRow& row, RateColumn column);

/// alpha(delta) = coefficient * delta
struct AlphaRule {
  double coefficient = 1.0;
  double operator()(double delta) const { return coefficient * delta; }
};

/// delta^{3/2} unless a fixed accuracy is set.
struct AccuracyRule {
  std::optional<double> fixed;
  double operator()(double delta) const;
  std::string describe() const;
};

/// 13 geometric points from 1e-1 down to 1e-7.
std::vector<double> default_delta_grid();
/// `count` geometric points from `hi` down to `lo`.
std::vector<double> geometric_grid(double hi, double lo, int count);

struct SweepConfig {
  std::vector<double> deltas = default_delta_grid();
  AlphaRule alpha_rule;
  AccuracyRule accuracy;
  std::uint64_t seed = 0;
  std::int64_t max_iter = std::int64_t{1} << 40;
  std::optional<double> norm_a;  // estimated once when absent
  std::string operator_tag = "unspecified";
  Index q = 0;
};

/// One row per delta against x+ = solve_limiting(A, G, A x_true), or against
/// `x_plus` when given. Rows run in parallel; row i draws its noise from
/// derive_seed(config.seed, i), so the table does not depend on the thread
/// count. Unconverged rows are flagged and kept.
RateTable run_rate_sweep(const LinearMap& forward, const RegOperator& reg, const Vector& x_true,
                         const SweepConfig& config, const std::optional<Vector>& x_plus = {});

/// Sweeps every sample of `signals`. Signal s uses seed derive_seed(config.seed, s)
/// so each table equals the single-signal sweep with that seed. The iteration
/// matrix powers for each delta are shared across signals.
std::vector<RateTable> run_rate_sweep_batch(const LinearMap& forward, const RegOperator& reg,
                                            const Dataset& signals, const SweepConfig& config);

struct MomentPair {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct AggregateRow {
  double delta = 0.0;
  double alpha = 0.0;
  MomentPair residual;
  MomentPair bregman;
  MomentPair norm_error;
  MomentPair iterations;
  double converged_fraction = 0.0;
};

/// Mean and standard deviation per delta over tables sharing one grid.
std::vector<AggregateRow> aggregate(const std::vector<RateTable>& tables);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  int used = 0;
  int excluded = 0;  // values <= 1e-15 or outside the delta range
};

inline constexpr double kSlopeFloor = 1e-15;

std::optional<std::pair<double, double>> default_slope_range();

/// Least-squares slope of log(value) against log(delta).
SlopeFit fit_slope(const std::vector<double>& deltas, const std::vector<double>& values,
                   std::optional<std::pair<double, double>> delta_range = {});
/// Default range keeps delta >= 1e-7.
SlopeFit fit_slope(const RateTable& table, RateColumn column,
                   std::optional<std::pair<double, double>> delta_range = default_slope_range());

struct StabilityReport {
  double data_gap = 0.0;  // ||y1 - y2||
  double image_gap = 0.0, image_bound = 0.0;      // ||A(x1-x2)|| vs ||y1-y2||
  double bregman = 0.0, bregman_bound = 0.0;      // vs ||y1-y2||^2 / (2 alpha)
  double solution_gap = 0.0, solution_bound = 0.0;  // vs sqrt(1/(2 alpha (1-L))) ||y1-y2||
  double slack = 0.0;
  bool image_ok = false, bregman_ok = false, solution_ok = false;

  bool passed() const { return image_ok && bregman_ok && solution_ok; }
};

/// Solves both problems to `tol` and compares the three stability bounds with
/// slack 10 tol / (alpha (1 - L)). Throws Error if either solve fails.
StabilityReport stability_probe(const LinearMap& forward, const RegOperator& reg, double alpha,
                                const Vector& y1, const Vector& y2, double tol,
                                std::optional<double> norm_a = {});

/// min_w ||A^T w - G(x+)|| / max(||G(x+)||, 1e-300), from the SVD of A.
double source_condition_residual(const LinearMap& forward, const RegOperator& reg,
                                 const Vector& x_plus, const SpectralDecomposition& decomp,
                                 double threshold = kDefaultSvdCutoff);
double source_condition_residual(const LinearMap& forward, const RegOperator& reg,
                                 const Vector& x_plus);

inline constexpr const char* kRateCsvHeader =
    "delta,alpha,residual,bregman,norm_error,iterations,accuracy,converged";

/// %.17g formatting.
std::string format_double(double v);

std::string rate_csv(const RateTable& table);
std::string metadata_text(const RateMetadata& meta);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

/// gnuplot script drawing the aggregate columns on log-log axes with the
/// reference line delta -> delta.
std::string plot_script(const std::string& aggregate_csv_name, const std::string& output_png);

}  // namespace eqreg

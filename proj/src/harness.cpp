#include "eqreg/harness.hpp"

#include "eqreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <memory>
#include <sstream>

namespace eqreg {

Vector add_noise(const Vector& y, const NoiseSpec& spec) {
  if (!(spec.target_delta >= 0.0) || !std::isfinite(spec.target_delta))
    throw InvalidArgument("noise level must be finite and >= 0");
  if (spec.target_delta == 0.0 || y.size() == 0) return y;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(spec.seed + attempt);
    const Vector g = gaussian_vector(rng, y.size());
    const double n = g.norm();
    if (n > 0.0) return y + (spec.target_delta / n) * g;
  }
}

const char* to_string(RateColumn column) {
  switch (column) {
    case RateColumn::kResidual: return "residual";
    case RateColumn::kBregman: return "bregman";
    case RateColumn::kNormError: return "norm_error";
    case RateColumn::kIterations: return "iterations";
  }
  return "?";
}

std::optional<RateColumn> parse_rate_column(const std::string& name) {
  for (RateColumn c : {RateColumn::kResidual, RateColumn::kBregman, RateColumn::kNormError,
                       RateColumn::kIterations})
    if (name == to_string(c)) return c;
  return std::nullopt;
}

double column_value(const RateRow& row, RateColumn column) {
  switch (column) {
    case RateColumn::kResidual: return row.residual;
    case RateColumn::kBregman: return row.bregman;
    case RateColumn::kNormError: return row.norm_error;
    case RateColumn::kIterations: return static_cast<double>(row.iterations);
  }
  return 0.0;
}

double AccuracyRule::operator()(double delta) const {
  return fixed ? *fixed : delta * std::sqrt(delta);
}

std::string AccuracyRule::describe() const {
  return fixed ? "fixed:" + format_double(*fixed) : std::string("delta^1.5");
}

std::vector<double> geometric_grid(double hi, double lo, int count) {
  if (!(hi > lo) || !(lo > 0.0) || count < 2)
    throw InvalidArgument("geometric_grid needs hi > lo > 0 and count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double step = std::log(lo / hi) / (count - 1);
  for (int i = 0; i < count; ++i) out[i] = hi * std::exp(step * i);
  out.front() = hi;
  out.back() = lo;
  return out;
}

std::vector<double> default_delta_grid() { return geometric_grid(1e-1, 1e-7, 13); }

namespace {

void check_grid(const std::vector<double>& deltas) {
  if (deltas.empty()) throw InvalidArgument("delta grid is empty");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || !std::isfinite(deltas[i]))
      throw InvalidArgument("deltas must be positive and finite");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw InvalidArgument("deltas must be strictly decreasing");
  }
}

struct SweepContext {
  const LinearMap& forward;
  const RegOperator& reg;
  const SweepConfig& config;
  double norm_a;
};

RateRow compute_row(const SweepContext& ctx, const Vector& y, const Vector& x_plus,
                    std::size_t i, std::uint64_t seed, LinearFixedPointSolver* solver) {
  RateRow row;
  row.delta = ctx.config.deltas[i];
  row.alpha = ctx.config.alpha_rule(row.delta);
  row.accuracy = ctx.config.accuracy(row.delta);
  const Vector y_delta = add_noise(y, {row.delta, derive_seed(seed, i)});

  SolveReport rep;
  if (solver) {
    rep = solver->solve(y_delta, row.accuracy, ctx.config.max_iter);
  } else {
    SolverConfig cfg;
    cfg.tol = row.accuracy;
    cfg.max_iter = ctx.config.max_iter;
    cfg.norm_a = ctx.norm_a;
    rep = solve_fixed_point({ctx.forward, ctx.reg, row.alpha, y_delta}, cfg);
  }
  row.residual = (ctx.forward.apply(rep.x) - y_delta).norm();
  row.bregman = sym_bregman(ctx.reg, rep.x, x_plus).value;
  row.norm_error = (rep.x - x_plus).norm();
  row.iterations = rep.iterations;
  row.converged = rep.converged;
  row.initial_residual = rep.initial_residual;
  row.predicted_iterations =
      rep.initial_residual > 0.0
          ? predict_iterations(row.delta, row.alpha, ctx.reg.lipschitz_bound(), ctx.norm_a,
                               row.accuracy, rep.initial_residual)
          : 0;
  return row;
}

std::unique_ptr<LinearFixedPointSolver> make_solver(const SweepContext& ctx, double alpha) {
  const bool dense_ok = ctx.forward.in_dim() <= kMaxDenseSide &&
                        ctx.forward.out_dim() <= kMaxDenseSide;
  if (!ctx.reg.is_linear() || !dense_ok) return nullptr;
  return std::make_unique<LinearFixedPointSolver>(ctx.forward, ctx.reg, alpha,
                                                  max_step(ctx.norm_a, alpha));
}

RateMetadata make_meta(const RegOperator& reg, const SweepConfig& config, std::uint64_t seed) {
  RateMetadata m;
  m.seed = seed;
  m.operator_tag = config.operator_tag;
  m.q = config.q;
  m.lipschitz = reg.lipschitz_bound();
  m.tol_rule = config.accuracy.describe();
  return m;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_sweep_inputs(const LinearMap& forward, const RegOperator& reg,
                        const SweepConfig& config) {
  check_grid(config.deltas);
  if (reg.dim() != forward.in_dim()) throw InvalidArgument("regularizer/operator dim mismatch");
  if (!(reg.lipschitz_bound() < 1.0))
    throw ContractivityViolation("rate sweep: L >= 1", reg.lipschitz_bound());
  if (!(config.alpha_rule.coefficient > 0.0)) throw InvalidArgument("alpha coefficient must be > 0");
}

}  // namespace

RateTable run_rate_sweep(const LinearMap& forward, const RegOperator& reg, const Vector& x_true,
                         const SweepConfig& config, const std::optional<Vector>& x_plus) {
  check_sweep_inputs(forward, reg, config);
  if (x_true.size() != forward.in_dim()) throw InvalidArgument("x_true length mismatch");
  const SweepContext ctx{forward, reg, config, config.norm_a.value_or(norm_upper_estimate(forward))};
  const Vector y = forward.apply(x_true);
  const Vector xp = x_plus ? *x_plus : solve_limiting(forward, reg, y, decompose(forward)).x;

  RateTable table;
  table.meta = make_meta(reg, config, config.seed);
  const auto n = static_cast<std::ptrdiff_t>(config.deltas.size());
  table.rows.resize(config.deltas.size());
  std::vector<std::exception_ptr> errors(config.deltas.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto solver = make_solver(ctx, config.alpha_rule(config.deltas[i]));
      table.rows[i] = compute_row(ctx, y, xp, static_cast<std::size_t>(i), config.seed, solver.get());
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return table;
}

std::vector<RateTable> run_rate_sweep_batch(const LinearMap& forward, const RegOperator& reg,
                                            const Dataset& signals, const SweepConfig& config) {
  check_sweep_inputs(forward, reg, config);
  if (signals.empty()) throw InvalidArgument("no signals to sweep");
  if (signals.dim() != forward.in_dim()) throw InvalidArgument("signal dim mismatch");
  const SweepContext ctx{forward, reg, config, config.norm_a.value_or(norm_upper_estimate(forward))};

  const Index count = signals.size();
  const SpectralDecomposition decomp = decompose(forward);
  std::vector<Vector> ys(count), xps(count);
  for (Index s = 0; s < count; ++s) {
    ys[s] = forward.apply(signals.sample(s));
    xps[s] = solve_limiting(forward, reg, ys[s], decomp).x;
  }

  std::vector<RateTable> tables(count);
  for (Index s = 0; s < count; ++s) {
    tables[s].meta = make_meta(reg, config, derive_seed(config.seed, s));
    tables[s].rows.resize(config.deltas.size());
  }
  const auto n = static_cast<std::ptrdiff_t>(config.deltas.size());
  std::vector<std::exception_ptr> errors(config.deltas.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto solver = make_solver(ctx, config.alpha_rule(config.deltas[i]));
      for (Index s = 0; s < count; ++s)
        tables[s].rows[i] = compute_row(ctx, ys[s], xps[s], static_cast<std::size_t>(i),
                                        tables[s].meta.seed, solver.get());
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return tables;
}

std::vector<AggregateRow> aggregate(const std::vector<RateTable>& tables) {
  if (tables.empty()) return {};
  const std::size_t rows = tables.front().rows.size();
  for (const auto& t : tables) {
    if (t.rows.size() != rows) throw InvalidArgument("tables have different delta grids");
    for (std::size_t i = 0; i < rows; ++i)
      if (t.rows[i].delta != tables.front().rows[i].delta)
        throw InvalidArgument("tables have different delta grids");
  }
  const double count = static_cast<double>(tables.size());
  auto moments = [&](std::size_t i, RateColumn c) {
    double sum = 0.0;
    for (const auto& t : tables) sum += column_value(t.rows[i], c);
    MomentPair m;
    m.mean = sum / count;
    double sq = 0.0;
    for (const auto& t : tables) {
      const double d = column_value(t.rows[i], c) - m.mean;
      sq += d * d;
    }
    m.stddev = std::sqrt(sq / count);
    return m;
  };
  std::vector<AggregateRow> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    AggregateRow& a = out[i];
    a.delta = tables.front().rows[i].delta;
    a.alpha = tables.front().rows[i].alpha;
    a.residual = moments(i, RateColumn::kResidual);
    a.bregman = moments(i, RateColumn::kBregman);
    a.norm_error = moments(i, RateColumn::kNormError);
    a.iterations = moments(i, RateColumn::kIterations);
    int conv = 0;
    for (const auto& t : tables) conv += t.rows[i].converged ? 1 : 0;
    a.converged_fraction = conv / count;
  }
  return out;
}

std::optional<std::pair<double, double>> default_slope_range() {
  return std::pair{1e-7, std::numeric_limits<double>::infinity()};
}

SlopeFit fit_slope(const std::vector<double>& deltas, const std::vector<double>& values,
                   std::optional<std::pair<double, double>> delta_range) {
  if (deltas.size() != values.size()) throw InvalidArgument("fit_slope: length mismatch");
  SlopeFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double d = deltas[i];
    const bool in_range = !delta_range || (d >= delta_range->first * (1.0 - 1e-9) &&
                                           d <= delta_range->second * (1.0 + 1e-9));
    if (!in_range || !(d > 0.0) || !(values[i] > kSlopeFloor) || !std::isfinite(values[i])) {
      ++fit.excluded;
      continue;
    }
    lx.push_back(std::log(d));
    ly.push_back(std::log(values[i]));
  }
  fit.used = static_cast<int>(lx.size());
  if (fit.used < 3)
    throw InsufficientData("fit_slope: " + std::to_string(fit.used) + " usable rows, need 3");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= fit.used;
  my /= fit.used;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw InsufficientData("fit_slope: all deltas coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

SlopeFit fit_slope(const RateTable& table, RateColumn column,
                   std::optional<std::pair<double, double>> delta_range) {
  std::vector<double> d, v;
  for (const auto& r : table.rows) {
    d.push_back(r.delta);
    v.push_back(column_value(r, column));
  }
  return fit_slope(d, v, delta_range);
}

StabilityReport stability_probe(const LinearMap& forward, const RegOperator& reg, double alpha,
                                const Vector& y1, const Vector& y2, double tol,
                                std::optional<double> norm_a) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  const double l = reg.lipschitz_bound();
  SolverConfig cfg;
  cfg.tol = tol;
  cfg.norm_a = norm_a ? *norm_a : norm_upper_estimate(forward);
  const SolveReport r1 = solve_fixed_point({forward, reg, alpha, y1}, cfg);
  const SolveReport r2 = solve_fixed_point({forward, reg, alpha, y2}, cfg);
  for (const SolveReport* r : {&r1, &r2})
    if (!r->converged)
      throw Error("stability_probe: solve stopped at ||T|| = " + format_double(r->residual_norm) +
                  " after " + std::to_string(r->iterations) + " iterations (tol " +
                  format_double(tol) + ")");

  StabilityReport rep;
  const Vector dx = r1.x - r2.x;
  rep.data_gap = (y1 - y2).norm();
  rep.slack = 10.0 * tol / (alpha * (1.0 - l));
  rep.image_gap = forward.apply(dx).norm();
  rep.image_bound = rep.data_gap;
  rep.bregman = sym_bregman(reg, r1.x, r2.x).value;
  rep.bregman_bound = rep.data_gap * rep.data_gap / (2.0 * alpha);
  rep.solution_gap = dx.norm();
  rep.solution_bound = std::sqrt(1.0 / (2.0 * alpha * (1.0 - l))) * rep.data_gap;
  rep.image_ok = rep.image_gap <= rep.image_bound + rep.slack;
  rep.bregman_ok = rep.bregman <= rep.bregman_bound + rep.slack;
  rep.solution_ok = rep.solution_gap <= rep.solution_bound + rep.slack;
  return rep;
}

double source_condition_residual(const LinearMap& forward, const RegOperator& reg,
                                 const Vector& x_plus, const SpectralDecomposition& decomp,
                                 double threshold) {
  if (x_plus.size() != forward.in_dim()) throw InvalidArgument("x_plus length mismatch");
  const Vector g = reg.apply(x_plus);
  const auto& s = decomp.singular_values;
  Vector w = Vector::Zero(forward.out_dim());
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] >= threshold)
      w += (decomp.right_vectors.col(i).dot(g) / s[i]) * decomp.left_vectors.col(i);
  return (forward.adjoint(w) - g).norm() / std::max(g.norm(), 1e-300);
}

double source_condition_residual(const LinearMap& forward, const RegOperator& reg,
                                 const Vector& x_plus) {
  return source_condition_residual(forward, reg, x_plus, decompose(forward));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string rate_csv(const RateTable& table) {
  std::ostringstream os;
  os << kRateCsvHeader << '\n';
  for (const auto& r : table.rows)
    os << format_double(r.delta) << ',' << format_double(r.alpha) << ','
       << format_double(r.residual) << ',' << format_double(r.bregman) << ','
       << format_double(r.norm_error) << ',' << r.iterations << ',' << format_double(r.accuracy)
       << ',' << (r.converged ? 1 : 0) << '\n';
  return os.str();
}

std::string metadata_text(const RateMetadata& meta) {
  std::ostringstream os;
  os << "seed=" << meta.seed << '\n'
     << "operator=" << meta.operator_tag << '\n'
     << "q=" << meta.q << '\n'
     << "L=" << format_double(meta.lipschitz) << '\n'
     << "tol_rule=" << meta.tol_rule << '\n';
  return os.str();
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "delta,alpha,residual_mean,residual_std,bregman_mean,bregman_std,norm_error_mean,"
        "norm_error_std,iterations_mean,iterations_std,converged_fraction\n";
  for (const auto& a : rows) {
    os << format_double(a.delta) << ',' << format_double(a.alpha);
    for (const MomentPair* m : {&a.residual, &a.bregman, &a.norm_error, &a.iterations})
      os << ',' << format_double(m->mean) << ',' << format_double(m->stddev);
    os << ',' << format_double(a.converged_fraction) << '\n';
  }
  return os.str();
}

std::string plot_script(const std::string& aggregate_csv_name, const std::string& output_png) {
  std::ostringstream os;
  os << "# gnuplot " << aggregate_csv_name << '\n'
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << output_png << "'\n"
     << "set logscale xy\n"
     << "set format xy '10^{%L}'\n"
     << "set xlabel 'delta'\n"
     << "set key left top\n"
     << "set xrange [*:*] reverse\n"
     << "plot '" << aggregate_csv_name << "' every ::1 using 1:3:4 with yerrorlines title 'residual', \\\n"
     << "     '' every ::1 using 1:5:6 with yerrorlines title 'bregman', \\\n"
     << "     '' every ::1 using 1:7:8 with yerrorlines title 'norm error', \\\n"
     << "     '' every ::1 using 1:1 with lines dashtype 2 title 'delta'\n";
  return os.str();
}

}  // namespace eqreg

#include "commands.hpp"

#include "eqreg/data.hpp"
#include "eqreg/equilibrium.hpp"
#include "eqreg/harness.hpp"
#include "eqreg/kernels.hpp"
#include "eqreg/random.hpp"
#include "eqreg/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace eqreg::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw InvalidArgument("config " + key + ": '" + v + "' is not a finite number");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw InvalidArgument("config " + key + ": '" + v + "' is not an integer");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

AccuracyRule parse_tol_rule(const std::string& rule) {
  AccuracyRule a;
  if (rule == "delta^1.5") return a;
  if (rule.rfind("fixed:", 0) == 0) {
    a.fixed = to_double("tol_rule", rule.substr(6));
    if (!(*a.fixed > 0.0)) throw InvalidArgument("tol_rule: fixed accuracy must be positive");
    return a;
  }
  throw InvalidArgument("tol_rule must be 'delta^1.5' or 'fixed:<eps>', got '" + rule + "'");
}

std::vector<double> delta_grid(const RunConfig& c) {
  if (!c.deltas.empty()) return c.deltas;
  return geometric_grid(c.delta_max, c.delta_min, c.delta_count);
}

std::string operator_tag(const RunConfig& c) {
  if (c.op == "deblur") return "deblur(k=" + std::to_string(c.kernel_size) + ")";
  if (c.op == "dense-file") return "dense-file";
  std::string rows;
  for (Index r : c.zeroed_rows) rows += (rows.empty() ? "" : " ") + std::to_string(r);
  return "inpainting(rows=" + rows + ")";
}

Dataset take(const Dataset& full, Index count, std::uint64_t seed, const char* what) {
  if (count < 0) return full;
  if (count > full.size())
    throw InvalidArgument(std::string(what) + " asks for " + std::to_string(count) +
                          " samples, file has " + std::to_string(full.size()));
  return split(full, count, 0, seed).first;
}

std::pair<Dataset, Dataset> synthetic_pair(const RunConfig& c, Index dim) {
  const Index train = std::max<Index>(c.train_count, 0);
  const Index test = std::max<Index>(c.test_count, 0);
  const SyntheticSet s = make_synthetic(dim, c.synthetic_q, train + test, c.data_seed);
  return split(s.data, train, test, c.data_seed);
}

Dataset checked_dim(Dataset d, Index dim, const std::string& path) {
  if (d.dim() != dim)
    throw InvalidArgument(path + ": samples have dim " + std::to_string(d.dim()) +
                          ", operator expects " + std::to_string(dim));
  return d;
}

void check_model(const RegOperator& reg, const LinearMap& a) {
  if (reg.dim() != a.in_dim())
    throw InvalidArgument("model dim " + std::to_string(reg.dim()) + " does not match operator dim " +
                          std::to_string(a.in_dim()));
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

// Runs a command body and maps library errors to exit code 2.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ContractivityViolation& e) {
    err << "error: " << e.what() << " (measured norm " << format_double(e.measured_norm()) << ")\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kConfigError;
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "operator") {
    if (v != "inpainting" && v != "deblur" && v != "dense-file")
      throw InvalidArgument("operator must be inpainting, deblur or dense-file, got '" + v + "'");
    c.op = v;
  } else if (key == "image_rows") {
    c.shape.rows = to_int(key, v);
  } else if (key == "image_cols") {
    c.shape.cols = to_int(key, v);
  } else if (key == "zeroed_rows") {
    c.zeroed_rows.clear();
    for (const auto& s : split_list(v)) c.zeroed_rows.push_back(to_int(key, s));
  } else if (key == "kernel_size") {
    c.kernel_size = to_int(key, v);
  } else if (key == "operator_file") {
    c.operator_file = v;
  } else if (key == "q") {
    c.q = to_int(key, v);
  } else if (key == "svd_threshold") {
    c.svd_threshold = to_double(key, v);
  } else if (key == "alpha_coefficient") {
    c.alpha_coefficient = to_double(key, v);
  } else if (key == "deltas") {
    c.deltas.clear();
    for (const auto& s : split_list(v)) c.deltas.push_back(to_double(key, s));
  } else if (key == "delta_max") {
    c.delta_max = to_double(key, v);
  } else if (key == "delta_min") {
    c.delta_min = to_double(key, v);
  } else if (key == "delta_count") {
    c.delta_count = static_cast<int>(to_int(key, v));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "train_data") {
    c.train_data = v;
  } else if (key == "test_data") {
    c.test_data = v;
  } else if (key == "synthetic_q") {
    c.synthetic_q = to_int(key, v);
  } else if (key == "train_count") {
    c.train_count = to_int(key, v);
  } else if (key == "test_count") {
    c.test_count = to_int(key, v);
  } else if (key == "data_seed") {
    c.data_seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else if (key == "tol_rule") {
    parse_tol_rule(v);
    c.tol_rule = v;
  } else if (key == "max_iter") {
    c.max_iter = to_int(key, v);
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

LinearMap build_operator(const RunConfig& c) {
  if (c.op == "dense-file") {
    if (c.operator_file.empty()) throw InvalidArgument("operator=dense-file needs operator_file");
    return load_dense_map(c.operator_file);
  }
  if (c.shape.rows <= 0 || c.shape.cols <= 0) throw InvalidArgument("image shape must be positive");
  if (c.op == "deblur") return make_motion_blur(c.shape, c.kernel_size);
  return make_inpainting(c.shape, c.zeroed_rows);
}

Dataset load_train(const RunConfig& c, Index dim) {
  if (c.train_data == "synthetic") return synthetic_pair(c, dim).first;
  return checked_dim(take(load_idx_file(c.train_data), c.train_count, c.data_seed, "train_count"),
                     dim, c.train_data);
}

Dataset load_test(const RunConfig& c, Index dim) {
  if (c.test_data == "synthetic") return synthetic_pair(c, dim).second;
  return checked_dim(take(load_idx_file(c.test_data), c.test_count, c.data_seed + 1, "test_count"),
                     dim, c.test_data);
}

void save_model(const fs::path& path, const RegOperator& reg, const Matrix& basis) {
  save_reg(reg, path);
  write_file_bytes(fs::path(path.string() + ".basis"), serialize_dense(basis));
}

Model load_model(const fs::path& path) {
  Model m{load_reg(path), Matrix()};
  const fs::path basis(path.string() + ".basis");
  m.basis = fs::exists(basis) ? deserialize_dense(read_file_bytes(basis)) : Matrix(m.reg.dim(), 0);
  if (m.basis.rows() != m.reg.dim()) throw InvalidArgument("basis file does not match the model dim");
  return m;
}

std::vector<double> read_vector_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(path.string(), tok));
  return out;
}

void write_vector_text(const fs::path& path, const Vector& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

int cmd_train(const RunConfig& c, const fs::path& model, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LinearMap a = build_operator(c);
    const Dataset train = load_train(c, a.in_dim());
    if (train.size() < 2) throw InvalidArgument("training needs at least 2 samples");
    const KernelProjector pker = kernel_projector(decompose(a), c.svd_threshold);
    const TrainedRegularizer t = train_linear_reg(train, pker, c.q);
    const RecoverabilityResult rc =
        recoverability_constant(project_dataset(train, t.subspace), pker, c.seed);
    if (model.has_parent_path()) fs::create_directories(model.parent_path());
    save_model(model, t.reg, t.subspace.basis);
    out << "operator=" << operator_tag(c) << '\n'
        << "dim=" << a.in_dim() << '\n'
        << "kernel_dim=" << pker.rank() << '\n'
        << "q=" << c.q << '\n'
        << "explained_energy=" << format_double(t.subspace.explained_energy) << '\n'
        << "L=" << format_double(t.reg.lipschitz_bound()) << '\n'
        << "L0=" << format_double(t.training_loss) << '\n'
        << "L_star=" << format_double(rc.value) << (rc.exhaustive ? "" : " (sampled)") << '\n'
        << "model=" << model.string() << '\n';
    return int{kOk};
  });
}

int cmd_sweep(const RunConfig& c, const fs::path& model, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LinearMap a = build_operator(c);
    const Model m = load_model(model);
    check_model(m.reg, a);
    const Dataset test = load_test(c, a.in_dim());
    if (test.empty()) throw InvalidArgument("test set is empty");

    SweepConfig sc;
    sc.deltas = delta_grid(c);
    sc.alpha_rule.coefficient = c.alpha_coefficient;
    sc.accuracy = parse_tol_rule(c.tol_rule);
    sc.seed = c.seed;
    sc.max_iter = c.max_iter;
    sc.operator_tag = operator_tag(c);
    sc.q = m.basis.cols();
    const std::vector<RateTable> tables = run_rate_sweep_batch(a, m.reg, test, sc);
    const std::vector<AggregateRow> agg = aggregate(tables);

    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    std::size_t failed = 0, total = 0;
    for (std::size_t s = 0; s < tables.size(); ++s) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "signal_%04zu", s);
      std::ofstream(dir / (std::string(stem) + ".csv"), std::ios::binary) << rate_csv(tables[s]);
      std::ofstream(dir / (std::string(stem) + ".meta"), std::ios::binary)
          << metadata_text(tables[s].meta);
      for (const auto& r : tables[s].rows) {
        ++total;
        if (!r.converged) {
          ++failed;
          out << "unconverged signal=" << s << " delta=" << format_double(r.delta)
              << " iterations=" << r.iterations << '\n';
        }
      }
    }
    RateMetadata meta = tables.front().meta;
    meta.seed = c.seed;
    std::ofstream(dir / "aggregate.csv", std::ios::binary) << aggregate_csv(agg);
    std::ofstream(dir / "aggregate.meta", std::ios::binary) << metadata_text(meta);
    std::ofstream(dir / "plot.gp", std::ios::binary) << plot_script("aggregate.csv", "rates.png");

    RateTable mean;
    for (const auto& r : agg) {
      RateRow row;
      row.delta = r.delta;
      row.residual = r.residual.mean;
      row.bregman = r.bregman.mean;
      row.norm_error = r.norm_error.mean;
      mean.rows.push_back(row);
    }
    for (RateColumn col : {RateColumn::kResidual, RateColumn::kBregman, RateColumn::kNormError}) {
      try {
        out << "slope_" << to_string(col) << '=' << format_double(fit_slope(mean, col).slope) << '\n';
      } catch (const InsufficientData& e) {
        out << "slope_" << to_string(col) << "=n/a (" << e.what() << ")\n";
      }
    }
    out << "signals=" << tables.size() << '\n'
        << "unconverged_rows=" << failed << '/' << total << '\n'
        << "output_dir=" << dir.string() << '\n';
    return failed == total ? int{kPropertyFailure} : int{kOk};
  });
}

int cmd_solve(const RunConfig& c, const fs::path& model, const SolveOptions& o, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const LinearMap a = build_operator(c);
    const Model m = load_model(model);
    check_model(m.reg, a);
    Vector y;
    std::optional<Vector> truth;
    if (o.input) {
      const auto values = read_vector_text(*o.input);
      y = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
      if (y.size() != a.out_dim())
        throw InvalidArgument("input has " + std::to_string(y.size()) + " entries, operator output dim is " +
                              std::to_string(a.out_dim()));
    } else {
      const Dataset test = load_test(c, a.in_dim());
      const Index s = o.signal.value_or(0);
      if (s < 0 || s >= test.size()) throw InvalidArgument("signal index out of range");
      truth = test.sample(s);
      y = a.apply(*truth);
    }
    const Vector y_delta = add_noise(y, {o.delta, derive_seed(c.seed, 0)});
    SolverConfig cfg;
    cfg.tol = o.tol;
    cfg.max_iter = c.max_iter;
    const SolveReport rep = solve_fixed_point({a, m.reg, o.alpha, y_delta}, cfg);
    write_vector_text(o.output, rep.x);
    out << "alpha=" << format_double(o.alpha) << '\n'
        << "delta=" << format_double(o.delta) << '\n'
        << "beta=" << format_double(rep.beta) << '\n'
        << "iterations=" << rep.iterations << '\n'
        << "residual_norm=" << format_double(rep.residual_norm) << '\n'
        << "converged=" << (rep.converged ? 1 : 0) << '\n'
        << "contraction_estimate=" << format_double(rep.contraction_estimate) << '\n'
        << "contraction_bound=" << format_double(rep.contraction_bound) << '\n';
    if (truth) out << "error=" << format_double((rep.x - *truth).norm()) << '\n';
    out << "output=" << o.output << '\n';
    return rep.converged ? int{kOk} : int{kPropertyFailure};
  });
}

int cmd_verify(const RunConfig& c, const fs::path& model, const VerifyOptions& o, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const LinearMap a = build_operator(c);
    const Model m = load_model(model);
    check_model(m.reg, a);
    const RegOperator& g = m.reg;
    const double l = g.lipschitz_bound();
    const SpectralDecomposition decomp = decompose(a);
    const double norm_a = norm_upper_estimate(a);
    const Index n = a.in_dim();
    Rng rng(derive_seed(c.seed, 7));
    int failures = 0;
    auto report = [&](bool ok, const std::string& name, const std::string& detail) {
      failures += ok ? 0 : 1;
      out << verdict(ok) << ' ' << name << ' ' << detail << '\n';
    };

    const EquivalenceReport eq = equivalence_check(g, o.trials, c.seed);
    report(eq.passed, "equivalence_check",
           "pairs=" + std::to_string(eq.pairs) + " worst_margin=" + format_double(eq.worst()) +
               " certificate_margin=" + format_double(eq.certificate_margin));

    {
      bool ok = true;
      double worst = -1e300;
      for (int p = 0; p < o.probes; ++p) {
        const double alpha = std::pow(10.0, uniform(rng, -3.0, 0.0));
        const Vector y1 = gaussian_vector(rng, a.out_dim());
        const Vector y2 = y1 + uniform(rng, 0.01, 1.0) * gaussian_vector(rng, a.out_dim());
        const StabilityReport s = stability_probe(a, g, alpha, y1, y2, 1e-10, norm_a);
        ok = ok && s.passed();
        worst = std::max({worst, s.image_gap - s.image_bound, s.bregman - s.bregman_bound,
                          s.solution_gap - s.solution_bound});
      }
      report(ok, "stability_probe",
             "probes=" + std::to_string(o.probes) + " worst_excess=" + format_double(worst));
    }

    {
      bool ok = true;
      double worst = -1e300;
      for (int p = 0; p < 50; ++p) {
        const double alpha = std::pow(10.0, uniform(rng, -3.0, 0.0));
        const Vector x = gaussian_vector(rng, n);
        const Vector rx = solve_direct_linear({a, g, alpha, a.apply(x)});
        const double margin = (x - rx).norm() - lower_bound_error(g, x, alpha, norm_a);
        worst = std::max(worst, -margin);
        ok = ok && margin >= -1e-9;
      }
      report(ok, "lower_bound", "cases=50 worst_deficit=" + format_double(worst));
    }

    Vector x_plus;
    {
      double worst = 0.0;
      for (int p = 0; p < 10; ++p) {
        const Vector z = gaussian_vector(rng, n);
        // x in ran(P_V) is recoverable by construction; without a basis use a
        // limiting solution, which is recoverable by definition
        const Vector x = m.basis.cols() > 0 ? Vector(m.basis * (m.basis.transpose() * z))
                                            : solve_limiting(a, g, a.apply(z), decomp).x;
        const LimitingSolution lim = solve_limiting(a, g, a.apply(x), decomp);
        worst = std::max(worst, (lim.x - x).norm() / std::max(1.0, x.norm()));
        x_plus = lim.x;
      }
      report(worst <= 1e-7, "limiting_recovery", "signals=10 worst_rel_error=" + format_double(worst));
    }

    {
      const double defect = source_condition_residual(a, g, x_plus, decomp);
      report(defect <= 1e-8, "source_condition", "defect=" + format_double(defect));
    }

    {
      const double alpha = 0.5;
      const double tol = 1e-10;
      const Vector x = gaussian_vector(rng, n);
      const Vector t = residual_T({a, g, alpha, a.apply(x)}, x);
      const double gap = (t - alpha * g.apply(x)).norm() / std::max(1.0, t.norm());
      const Vector zero = Vector::Zero(n);
      const bool zero_is_eq = residual_T({a, g, alpha, a.apply(zero)}, zero).norm() <= tol;
      const bool x_is_eq = t.norm() <= tol;
      const bool x_should_be = g.apply(x).norm() <= tol / alpha;
      report(gap <= 1e-12 && zero_is_eq && x_is_eq == x_should_be, "exact_recovery",
             "identity_gap=" + format_double(gap) + " random_x_equilibrium=" +
                 std::to_string(x_is_eq) + " zero_equilibrium=" + std::to_string(zero_is_eq));
    }

    out << "L=" << format_double(l) << '\n'
        << "failures=" << failures << '\n';
    return failures == 0 ? int{kOk} : int{kPropertyFailure};
  });
}

int cmd_info(const RunConfig& c, const std::optional<fs::path>& model, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const LinearMap a = build_operator(c);
    const SpectralDecomposition d = decompose(a);
    const KernelProjector pker = kernel_projector(d, c.svd_threshold);
    const NormEstimate ne = operator_norm(a);
    out << "operator=" << operator_tag(c) << '\n'
        << "shape=" << a.out_dim() << 'x' << a.in_dim() << '\n'
        << "norm_power_iteration=" << format_double(ne.value) << " iterations=" << ne.iterations
        << '\n'
        << "kernel_dim=" << pker.rank() << " (cutoff " << format_double(c.svd_threshold) << ")\n";
    const Index k = d.singular_values.size();
    out << "singular_values_top=";
    for (Index i = 0; i < std::min<Index>(k, 5); ++i)
      out << (i ? "," : "") << format_double(d.singular_values[i]);
    out << "\nsingular_values_bottom=";
    for (Index i = std::max<Index>(0, k - 5); i < k; ++i)
      out << (i > std::max<Index>(0, k - 5) ? "," : "") << format_double(d.singular_values[i]);
    out << '\n';
    if (model) {
      const Model m = load_model(*model);
      check_model(m.reg, a);
      out << "form=" << to_string(m.reg.form()) << '\n'
          << "L=" << format_double(m.reg.lipschitz_bound()) << '\n'
          << "q=" << m.basis.cols() << '\n';
      if (m.reg.is_linear())
        out << "W_spectral_norm=" << format_double(spectral_norm(m.reg.residual_matrix())) << '\n';
    }
    const Dataset test = load_test(c, a.in_dim());
    if (test.size() >= 2) {
      const RecoverabilityResult rc = recoverability_constant(test, pker, c.seed);
      out << "L_star_test=" << format_double(rc.value) << (rc.exhaustive ? "" : " (sampled)") << '\n';
    }
    return int{kOk};
  });
}

}  // namespace eqreg::cli

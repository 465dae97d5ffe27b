#pragma once

#include "eqreg/dataset.hpp"
#include "eqreg/linops.hpp"
#include "eqreg/regularizers.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eqreg::cli {

enum ExitCode : int { kOk = 0, kPropertyFailure = 1, kConfigError = 2 };

struct RunConfig {
  std::string op = "inpainting";  // inpainting | deblur | dense-file
  ImageShape shape{8, 8};
  std::vector<Index> zeroed_rows{2, 5};
  Index kernel_size = 3;
  std::string operator_file;
  Index q = 8;
  double svd_threshold = kDefaultSvdCutoff;
  double alpha_coefficient = 1.0;
  std::vector<double> deltas;  // empty: geometric grid below
  double delta_max = 1e-1;
  double delta_min = 1e-7;
  int delta_count = 13;
  std::uint64_t seed = 0;
  std::string train_data = "synthetic";  // IDX path or "synthetic"
  std::string test_data = "synthetic";
  Index synthetic_q = 8;
  Index train_count = 200;  // negative: whole file
  Index test_count = 10;
  std::uint64_t data_seed = 1;
  std::string output_dir = "out";
  std::string tol_rule = "delta^1.5";  // or fixed:<eps>
  std::int64_t max_iter = std::int64_t{1} << 40;
};

/// Applies one key=value pair. Throws InvalidArgument for unknown keys or
/// malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Flat key=value text; '#' starts a comment.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

LinearMap build_operator(const RunConfig& config);
Dataset load_train(const RunConfig& config, Index dim);
Dataset load_test(const RunConfig& config, Index dim);

/// The model is written to `path` and its P_V basis to `path` + ".basis".
struct Model {
  RegOperator reg;
  Matrix basis;
};
void save_model(const std::filesystem::path& path, const RegOperator& reg, const Matrix& basis);
Model load_model(const std::filesystem::path& path);

struct SolveOptions {
  double alpha = 1e-2;
  double delta = 0.0;
  std::optional<Index> signal;   // test-set sample used as ground truth
  std::optional<std::string> input;  // text vector y
  std::string output = "solution.txt";
  double tol = 1e-10;
};

struct VerifyOptions {
  int trials = 1000;
  int probes = 20;
};

// Each command returns an ExitCode; errors other than property failures are
// reported on `err` with code 2.
int cmd_train(const RunConfig& config, const std::filesystem::path& model, std::ostream& out,
              std::ostream& err);
int cmd_sweep(const RunConfig& config, const std::filesystem::path& model, std::ostream& out,
              std::ostream& err);
int cmd_solve(const RunConfig& config, const std::filesystem::path& model,
              const SolveOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& config, const std::filesystem::path& model,
               const VerifyOptions& options, std::ostream& out, std::ostream& err);
int cmd_info(const RunConfig& config, const std::optional<std::filesystem::path>& model,
             std::ostream& out, std::ostream& err);

std::vector<double> read_vector_text(const std::filesystem::path& path);
void write_vector_text(const std::filesystem::path& path, const Vector& v);

}  // namespace eqreg::cli

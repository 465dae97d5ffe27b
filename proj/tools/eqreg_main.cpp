#include "commands.hpp"

#include "eqreg/kernels.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using eqreg::cli::RunConfig;

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c = path.empty() ? RunConfig{} : eqreg::cli::load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw eqreg::InvalidArgument("--set expects key=value, got '" + kv + "'");
    eqreg::cli::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  eqreg::kernels::set_thread_cap(eqreg::kernels::thread_cap_from_env());

  CLI::App app{"Equilibrium regularization toolkit. EQREG_THREADS caps the thread count."};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  std::string model = "out/model.eqreg";
  app.add_option("-c,--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "override one config key (key=value)")
      ->allow_extra_args(false);
  app.add_option("-m,--model", model, "model artifact path")->capture_default_str();

  auto* train = app.add_subcommand("train", "build G from training data and write the model");
  auto* sweep = app.add_subcommand("sweep", "convergence-rate sweep over the test set");
  auto* solve = app.add_subcommand("solve", "solve one noisy instance");
  auto* verify = app.add_subcommand("verify", "run the property checks on a model");
  auto* info = app.add_subcommand("info", "print operator spectrum and model constants");

  eqreg::cli::SolveOptions so;
  std::string input;
  eqreg::Index signal = 0;
  solve->add_option("--alpha", so.alpha)->capture_default_str();
  solve->add_option("--delta", so.delta, "noise level")->capture_default_str();
  solve->add_option("--tol", so.tol)->capture_default_str();
  auto* input_opt = solve->add_option("--input", input, "text file with y (one value per line)");
  auto* signal_opt = solve->add_option("--signal", signal, "test sample used as ground truth");
  input_opt->excludes(signal_opt);
  solve->add_option("-o,--output", so.output)->capture_default_str();

  eqreg::cli::VerifyOptions vo;
  verify->add_option("--trials", vo.trials, "random pairs for the equivalence check")
      ->capture_default_str();
  verify->add_option("--probes", vo.probes, "stability probes")->capture_default_str();

  bool info_model = false;
  info->add_flag("--with-model", info_model, "also report the model constants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : eqreg::cli::kConfigError;
  }

  RunConfig config;
  try {
    config = resolve_config(config_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return eqreg::cli::kConfigError;
  }

  if (*train) return eqreg::cli::cmd_train(config, model, std::cout, std::cerr);
  if (*sweep) return eqreg::cli::cmd_sweep(config, model, std::cout, std::cerr);
  if (*solve) {
    if (*input_opt) so.input = input;
    if (*signal_opt) so.signal = signal;
    return eqreg::cli::cmd_solve(config, model, so, std::cout, std::cerr);
  }
  if (*verify) return eqreg::cli::cmd_verify(config, model, vo, std::cout, std::cerr);
  std::optional<std::filesystem::path> m;
  if (info_model) m = model;
  return eqreg::cli::cmd_info(config, m, std::cout, std::cerr);
}

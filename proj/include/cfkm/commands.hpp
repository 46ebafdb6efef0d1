#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cfkm/cli_io.hpp"

namespace cfkm {

struct DataArgs {
  std::string input;
  std::string counterfactual;
  std::string grid;
  std::string grid_file;
  std::string bandwidth = "auto";
  std::string kernel = "quartic4";
  std::string hazard = "neg-log";
  std::string variant = "exponential";
  std::string neighborhood = "fail";
  double alpha = 0.05;
  double zeta_quantile = 0.95;
  bool isotonize = false;
  bool allow_unequal = false;
  bool independent_xstar = false;
  unsigned threads = 1;
  std::optional<std::string> timestamp;
};

struct EstimateArgs : DataArgs {
  /// Any of km, counterfactual, rothe, conditional.
  std::vector<std::string> curves{"counterfactual"};
  /// Covariate point for the conditional curve.
  std::vector<double> at;
};

struct SimulateArgs {
  std::string config;
  std::vector<std::size_t> sizes;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::string grid;
  std::string bandwidth;
  std::string kernel;
  std::string hazard;
  std::optional<bool> strict;
  std::optional<unsigned> threads;
  /// "long": one row per (target, n, estimator); "wide": the two-block table layout.
  std::string layout = "long";
  std::optional<std::string> timestamp;
};

struct CommandOutput {
  Table table;
  RunManifest manifest;
  /// Path the config asked for, used when --output is absent.
  std::string default_output;
};

/// Columns: t, then <curve>, <curve>_lo, <curve>_hi for each requested curve.
/// Bands exist for km and counterfactual up to the inference horizon; other
/// cells are nan.
CommandOutput cmd_estimate(const EstimateArgs& args);

/// Columns: t, f_star, f_base, delta_f, delta_f_lo, delta_f_hi, lambda_star,
/// lambda_base, delta_lambda, delta_lambda_lo, delta_lambda_hi.
CommandOutput cmd_effect(const DataArgs& args);

CommandOutput cmd_simulate(const SimulateArgs& args);

/// Parses argv, runs the subcommand and writes its output. Failures print an
/// error record on `err` and return the mapped exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cfkm

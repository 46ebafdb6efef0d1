#include "cfkm/commands.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfkm/counterfactual.hpp"
#include "cfkm/inference.hpp"
#include "cfkm/survival.hpp"

namespace cfkm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Prepared {
  CensoredSample sample;
  std::optional<CounterfactualCovariates> xstar;
  Grid grid{std::vector<double>{0.0}};
  std::string grid_desc;
  double h = 0.0;
  KernelSpec spec;
  HazardMethod hazard = HazardMethod::neg_log;
  CounterfactualOptions options;
  InferenceOptions inference;
};

ConditionalVariant parse_variant(const std::string& name) {
  if (name == "exponential") return ConditionalVariant::exponential;
  if (name == "product-limit" || name == "product_limit") return ConditionalVariant::product_limit;
  throw Error(ErrorCode::invalid_argument, "unknown conditional variant '" + name + "'");
}

NeighborhoodPolicy parse_neighborhood(const std::string& name) {
  if (name == "fail") return NeighborhoodPolicy::fail;
  if (name == "drop") return NeighborhoodPolicy::drop;
  throw Error(ErrorCode::invalid_argument, "unknown neighborhood policy '" + name + "'");
}

BandwidthRule parse_bandwidth(const std::string& text) {
  BandwidthRule rule;
  if (text.empty() || text == "auto") return rule;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorCode::invalid_bandwidth, "bandwidth must be 'auto' or a positive number, got '" + text + "'");
  rule.fixed = value;
  return rule;
}

std::string grid_description(const Grid& grid) {
  if (grid.step())
    return format_double(grid.front()) + ":" + format_double(grid.back()) + ":" + format_double(*grid.step());
  return std::to_string(grid.size()) + " points";
}

Prepared prepare(const DataArgs& args, bool need_xstar) {
  if (args.input.empty()) throw Error(ErrorCode::invalid_argument, "--input is required");
  Prepared p;
  p.sample = load_sample_csv(args.input);
  if (need_xstar) {
    if (args.counterfactual.empty()) throw Error(ErrorCode::invalid_argument, "--counterfactual is required");
    p.xstar = load_counterfactual_csv(args.counterfactual, p.sample, args.allow_unequal);
  }
  if (args.grid.empty() == args.grid_file.empty())
    throw Error(ErrorCode::invalid_grid, "give exactly one of --grid and --grid-file");
  if (!args.grid.empty()) {
    p.grid = parse_grid_spec(args.grid);
    p.grid_desc = args.grid;
  } else {
    p.grid = load_grid_file(args.grid_file);
    p.grid_desc = "file:" + args.grid_file;
  }
  check_grid_support(p.grid, p.sample);
  p.h = parse_bandwidth(args.bandwidth)(p.sample.size());
  p.spec = KernelSpec{parse_kernel_profile(args.kernel), p.sample.dim()};
  p.hazard = parse_hazard_method(args.hazard);
  p.options.variant = parse_variant(args.variant);
  p.options.neighborhood = parse_neighborhood(args.neighborhood);
  p.options.isotonize = args.isotonize;
  p.options.threads = args.threads;
  p.inference.zeta_quantile = args.zeta_quantile;
  p.inference.variant = p.options.variant;
  p.inference.threads = args.threads;
  if (!(args.alpha > 0.0 && args.alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  return p;
}

RunManifest data_manifest(const std::string& command, const DataArgs& args, const Prepared& p) {
  RunManifest m;
  m.command = command;
  m.inputs.emplace_back("sample", args.input);
  if (!args.counterfactual.empty()) m.inputs.emplace_back("counterfactual", args.counterfactual);
  m.kernel = std::string(to_string(p.spec.profile));
  m.bandwidth = format_double(p.h);
  m.grid = p.grid_desc;
  m.hazard = std::string(to_string(p.hazard));
  m.alpha = args.alpha;
  m.timestamp = resolve_timestamp(args.timestamp);
  m.extra.emplace_back("bandwidth_rule", args.bandwidth == "auto" ? "3 n^(-1/7)" : "fixed");
  m.extra.emplace_back("variant", args.variant);
  m.extra.emplace_back("neighborhood", args.neighborhood);
  m.extra.emplace_back("isotonize", args.isotonize ? "true" : "false");
  m.extra.emplace_back("horizon_quantile", format_double(args.zeta_quantile));
  if (!args.counterfactual.empty())
    m.extra.emplace_back("xstar_pairing", args.independent_xstar ? "independent" : "aligned");
  return m;
}

// Library row indices from counterfactual rows are 0-based; the CLI reports
// 1-based data rows of the file.
template <class Fn>
auto with_xstar_rows(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& err) {
    if (err.code() != ErrorCode::empty_neighborhood || !err.row()) throw;
    const std::size_t row = *err.row() + 1;
    throw Error(err.code(), "counterfactual file row " + std::to_string(row) + ": " + err.what(), row);
  }
}

std::vector<double> padded(std::vector<double> values, std::size_t size) {
  values.resize(size, kNaN);
  return values;
}

std::vector<double> prefix(const std::vector<double>& values, std::size_t count) {
  return {values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count)};
}

}  // namespace

CommandOutput cmd_estimate(const EstimateArgs& args) {
  bool need_xstar = false;
  for (const auto& c : args.curves) {
    if (c == "counterfactual" || c == "rothe")
      need_xstar = true;
    else if (c != "km" && c != "conditional")
      throw Error(ErrorCode::invalid_argument, "unknown curve '" + c + "'");
  }
  if (args.curves.empty()) throw Error(ErrorCode::invalid_argument, "no curve requested");
  const Prepared p = prepare(args, need_xstar);
  const std::size_t n = p.sample.size();
  const std::size_t g = p.grid.size();

  CommandOutput result;
  result.manifest = data_manifest("estimate", args, p);
  Table& table = result.table;
  table.columns.push_back("t");
  std::vector<std::vector<double>> columns{p.grid.points()};

  auto add = [&](const std::string& name, std::vector<double> est, std::vector<double> lo, std::vector<double> hi) {
    table.columns.push_back(name);
    table.columns.push_back(name + "_lo");
    table.columns.push_back(name + "_hi");
    columns.push_back(std::move(est));
    columns.push_back(std::move(lo));
    columns.push_back(std::move(hi));
  };
  const std::vector<double> none(g, kNaN);

  for (const auto& curve : args.curves) {
    if (curve == "km") {
      const auto est = kaplan_meier(p.sample).evaluate(p.grid);
      const KmInfluence km = make_km_influence(p.sample, p.inference);
      table.notes.emplace_back("km_horizon", format_double(km.zeta));
      Bands bands{none, none};
      if (auto sub = p.grid.truncated(km.zeta)) {
        const auto var = sigma22_hat(km, *sub).diagonal();
        const Bands b = pointwise_ci(prefix(est, sub->size()), var, n, args.alpha);
        bands = {padded(b.lower, g), padded(b.upper, g)};
      }
      add("km", est, std::move(bands.lower), std::move(bands.upper));
    } else if (curve == "counterfactual") {
      const auto cf = with_xstar_rows([&] { return counterfactual_curve(p.sample, *p.xstar, p.h, p.spec, p.options); });
      auto est = cf.curve.evaluate(p.grid);
      if (p.options.isotonize) est = isotonize(est);
      table.notes.emplace_back("degenerate_terms", std::to_string(cf.degenerate_terms));
      table.notes.emplace_back("dropped_rows", std::to_string(cf.dropped_rows.size()));
      const InfluenceContext ctx =
          with_xstar_rows([&] { return make_influence_context(p.sample, *p.xstar, p.h, p.spec, p.inference); });
      table.notes.emplace_back("counterfactual_horizon", format_double(ctx.base.zeta));
      Bands bands{none, none};
      if (auto sub = p.grid.truncated(ctx.base.zeta)) {
        const auto var = sigma11_hat(ctx, *sub).diagonal();
        const Bands b = pointwise_ci(prefix(est, sub->size()), var, n, args.alpha);
        bands = {padded(b.lower, g), padded(b.upper, g)};
      }
      add("counterfactual", std::move(est), std::move(bands.lower), std::move(bands.upper));
    } else if (curve == "rothe") {
      const auto rc = with_xstar_rows([&] { return rothe_cdf(p.sample, *p.xstar, p.h, p.spec, p.grid, p.options); });
      add("rothe", rc.values, none, none);
    } else {
      if (args.at.size() != p.sample.dim())
        throw Error(ErrorCode::dimension_mismatch,
                    "--at needs " + std::to_string(p.sample.dim()) + " covariate values");
      const ConditionalCurve cc = beran_conditional(p.sample, {args.at, p.h, p.spec, p.options.variant});
      table.notes.emplace_back("conditional_degenerate_terms", std::to_string(cc.degenerate_terms));
      add("conditional", cc.curve.evaluate(p.grid), none, none);
    }
  }

  table.rows.resize(g);
  for (std::size_t k = 0; k < g; ++k)
    for (const auto& col : columns) table.rows[k].emplace_back(col[k]);
  return result;
}

CommandOutput cmd_effect(const DataArgs& args) {
  const Prepared p = prepare(args, true);
  const std::size_t n = p.sample.size();
  const std::size_t g = p.grid.size();

  const PolicyEffectCurves pe =
      with_xstar_rows([&] { return policy_effects(p.sample, *p.xstar, p.h, p.spec, p.grid, p.hazard, p.options); });
  const InfluenceContext ctx =
      with_xstar_rows([&] { return make_influence_context(p.sample, *p.xstar, p.h, p.spec, p.inference); });

  std::vector<double> f_lo(g, kNaN), f_hi(g, kNaN), l_lo(g, kNaN), l_hi(g, kNaN);
  if (auto sub = p.grid.truncated(ctx.base.zeta)) {
    const std::size_t m = sub->size();
    const auto s11 = sigma11_hat(ctx, *sub);
    const auto s22 = sigma22_hat(ctx.base, *sub);
    const auto s12 = sigma12_hat(ctx, *sub, !args.independent_xstar);
    const auto var = effect_variances(s11, s22, s12, prefix(pe.f_star, m), prefix(pe.f_base, m));
    const Bands bf = pointwise_ci(prefix(pe.delta_f, m), var.delta_f, n, args.alpha);
    const Bands bl = pointwise_ci(prefix(pe.delta_lambda, m), var.delta_lambda, n, args.alpha);
    f_lo = padded(bf.lower, g);
    f_hi = padded(bf.upper, g);
    l_lo = padded(bl.lower, g);
    l_hi = padded(bl.upper, g);
  }

  CommandOutput result;
  result.manifest = data_manifest("effect", args, p);
  Table& table = result.table;
  table.columns = {"t",           "f_star",      "f_base",       "delta_f",         "delta_f_lo",     "delta_f_hi",
                   "lambda_star", "lambda_base", "delta_lambda", "delta_lambda_lo", "delta_lambda_hi"};
  table.notes.emplace_back("horizon", format_double(ctx.base.zeta));
  table.notes.emplace_back("degenerate_terms", std::to_string(pe.degenerate_terms));
  table.notes.emplace_back("dropped_rows", std::to_string(pe.dropped_rows.size()));
  for (std::size_t k = 0; k < g; ++k) {
    table.rows.push_back({p.grid[k], pe.f_star[k], pe.f_base[k], pe.delta_f[k], f_lo[k], f_hi[k], pe.lambda_star[k],
                          pe.lambda_base[k], pe.delta_lambda[k], l_lo[k], l_hi[k]});
  }
  return result;
}

CommandOutput cmd_simulate(const SimulateArgs& args) {
  StudyConfig config = args.config.empty() ? StudyConfig{} : load_study_config(args.config);
  if (!args.sizes.empty()) config.sizes = args.sizes;
  if (args.replications) config.replications = *args.replications;
  if (args.seed) config.base_seed = *args.seed;
  if (!args.grid.empty()) config.grid = parse_grid_spec(args.grid);
  if (!args.bandwidth.empty()) {
    const BandwidthRule rule = parse_bandwidth(args.bandwidth);
    config.bandwidth.fixed = rule.fixed;
  }
  if (!args.kernel.empty()) config.kernel = parse_kernel_profile(args.kernel);
  if (!args.hazard.empty()) config.hazard = parse_hazard_method(args.hazard);
  if (args.strict) config.strict = *args.strict;
  if (args.threads) config.threads = *args.threads;
  if (config.replications == 0) throw Error(ErrorCode::config, "replications must be positive");
  if (args.layout != "long" && args.layout != "wide")
    throw Error(ErrorCode::invalid_argument, "layout must be long or wide");

  const SimulationReport report = run_study(config);

  CommandOutput result;
  result.default_output = config.output;
  RunManifest& m = result.manifest;
  m.command = "simulate";
  if (!args.config.empty()) m.inputs.emplace_back("config", args.config);
  m.kernel = std::string(to_string(config.kernel));
  m.bandwidth = config.bandwidth.fixed ? format_double(*config.bandwidth.fixed)
                                       : format_double(config.bandwidth.constant) + " n^(-" +
                                             format_double(config.bandwidth.exponent) + ")";
  m.grid = grid_description(config.grid);
  m.hazard = std::string(to_string(config.hazard));
  m.seed = config.base_seed;
  m.timestamp = resolve_timestamp(args.timestamp);
  std::string sizes, estimators;
  for (auto s : config.sizes) sizes += (sizes.empty() ? "" : ",") + std::to_string(s);
  for (auto e : config.estimators) estimators += (estimators.empty() ? "" : ",") + std::string(to_string(e));
  m.extra.emplace_back("sizes", sizes);
  m.extra.emplace_back("replications", std::to_string(config.replications));
  m.extra.emplace_back("estimators", estimators);
  m.extra.emplace_back("strict", config.strict ? "true" : "false");
  m.extra.emplace_back("layout", args.layout);

  Table& table = result.table;
  if (args.layout == "long") {
    table.columns = {"target", "n", "estimator", "miae", "rmise", "replications", "excluded", "bandwidth"};
    for (const auto& row : report.rows)
      table.rows.push_back({std::string(to_string(row.target)), static_cast<std::int64_t>(row.n),
                            std::string(to_string(row.estimator)), row.miae, row.rmise,
                            static_cast<std::int64_t>(row.replications), static_cast<std::int64_t>(row.excluded),
                            row.bandwidth});
  } else {
    table.columns = {"target", "metric", "n"};
    for (auto e : config.estimators) table.columns.emplace_back(to_string(e));
    for (Target target : {Target::cdf, Target::hazard}) {
      for (const char* metric : {"miae", "rmise"}) {
        for (std::size_t n : config.sizes) {
          std::vector<Cell> cells{std::string(to_string(target)), std::string(metric), static_cast<std::int64_t>(n)};
          for (auto e : config.estimators) {
            const ReportRow& row = report.at(target, n, e);
            cells.emplace_back(std::string_view(metric) == "miae" ? row.miae : row.rmise);
          }
          table.rows.push_back(std::move(cells));
        }
      }
    }
  }
  std::size_t excluded = 0;
  for (const auto& row : report.rows) excluded += row.excluded;
  table.notes.emplace_back("excluded_cells", std::to_string(excluded));
  return result;
}

namespace {

void add_output_flags(CLI::App* sub, std::string& output, std::string& format) {
  sub->add_option("--output,-o", output, "Output file (stdout when absent)");
  sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

void add_data_flags(CLI::App* sub, DataArgs& a) {
  sub->add_option("--input,-i", a.input, "Sample CSV with columns y,delta,x1..xd")->required();
  sub->add_option("--grid", a.grid, "Evaluation grid start:stop:step");
  sub->add_option("--grid-file", a.grid_file, "Evaluation grid, one time per line");
  sub->add_option("--bandwidth", a.bandwidth, "auto (3 n^(-1/7)) or a positive number");
  sub->add_option("--kernel", a.kernel, "quartic4 or epanechnikov");
  sub->add_option("--hazard", a.hazard, "neg-log or na-integral");
  sub->add_option("--variant", a.variant, "exponential or product-limit conditional estimator");
  sub->add_option("--neighborhood", a.neighborhood, "fail or drop rows without kernel mass");
  sub->add_option("--alpha", a.alpha, "Pointwise CI level is 1 - alpha");
  sub->add_option("--horizon-quantile", a.zeta_quantile, "Quantile of uncensored durations bounding inference");
  sub->add_flag("--isotonize", a.isotonize, "Running maximum and [0,1] clipping of counterfactual grid values");
  sub->add_option("--threads", a.threads, "Worker threads");
  sub->add_option("--timestamp", a.timestamp, "Manifest timestamp override");
}

void add_xstar_flags(CLI::App* sub, DataArgs& a) {
  sub->add_option("--counterfactual,-c", a.counterfactual, "Counterfactual covariate CSV with columns x1..xd");
  sub->add_flag("--allow-unequal", a.allow_unequal, "Accept a counterfactual row count different from n");
  sub->add_flag("--independent-xstar", a.independent_xstar,
                "Treat counterfactual rows as independent of the sample");
}

std::string usage_record(const std::string& message, int code) {
  nlohmann::ordered_json rec;
  rec["error"] = "usage";
  rec["exit_code"] = code;
  rec["message"] = message;
  rec["row"] = nullptr;
  return rec.dump();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual Kaplan-Meier estimation for right-censored durations", "cfkm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string output;
  std::string format = "csv";

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Unconditional, conditional or counterfactual curves with CIs");
  add_data_flags(estimate, est);
  add_xstar_flags(estimate, est);
  estimate->add_option("--curve", est.curves, "km, counterfactual, rothe, conditional (repeatable)")
      ->delimiter(',');
  estimate->add_option("--at", est.at, "Covariate point for the conditional curve, comma separated")
      ->delimiter(',');
  add_output_flags(estimate, output, format);

  DataArgs eff;
  auto* effect = app.add_subcommand("effect", "Policy effects on the CDF and cumulative hazard with CIs");
  add_data_flags(effect, eff);
  add_xstar_flags(effect, eff);
  add_output_flags(effect, output, format);

  SimulateArgs sim;
  std::string strict;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of the bundled design");
  simulate->add_option("--config", sim.config, "Study config (key = value)");
  simulate->add_option("--sizes", sim.sizes, "Sample sizes, comma separated")->delimiter(',');
  simulate->add_option("--reps", sim.replications, "Replications per size");
  simulate->add_option("--seed", sim.seed, "Base seed");
  simulate->add_option("--grid", sim.grid, "Evaluation grid start:stop:step");
  simulate->add_option("--bandwidth", sim.bandwidth, "auto or a positive number");
  simulate->add_option("--kernel", sim.kernel, "quartic4 or epanechnikov");
  simulate->add_option("--hazard", sim.hazard, "neg-log or na-integral");
  simulate->add_option("--strict", strict, "true: abort on the first estimator failure")
      ->check(CLI::IsMember({"true", "false"}));
  simulate->add_option("--threads", sim.threads, "Worker threads");
  simulate->add_option("--layout", sim.layout, "long or wide")->check(CLI::IsMember({"long", "wide"}));
  simulate->add_option("--timestamp", sim.timestamp, "Manifest timestamp override");
  add_output_flags(simulate, output, format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << usage_record(e.what(), 2) << '\n';
    return 2;
  }
  if (!strict.empty()) sim.strict = strict == "true";

  try {
    CommandOutput result;
    if (estimate->parsed())
      result = cmd_estimate(est);
    else if (effect->parsed())
      result = cmd_effect(eff);
    else
      result = cmd_simulate(sim);
    const std::string path = output.empty() ? result.default_output : output;
    write_output(render(result.table, result.manifest, parse_output_format(format)), path, out);
    return 0;
  } catch (const Error& e) {
    err << error_record(e) << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << usage_record(e.what(), 1) << '\n';
    return 1;
  }
}

}  // namespace cfkm

#include "cfkm/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfkm/error.hpp"
#include "cfkm/parallel.hpp"

namespace cfkm {

std::string_view to_string(HazardMethod method) noexcept {
  return method == HazardMethod::neg_log ? "neg-log" : "na-integral";
}

HazardMethod parse_hazard_method(std::string_view name) {
  if (name == "neg-log" || name == "neg_log") return HazardMethod::neg_log;
  if (name == "na-integral" || name == "na_integral") return HazardMethod::na_integral;
  throw Error(ErrorCode::invalid_argument, "unknown hazard method '" + std::string(name) + "'");
}

namespace {

// Rows are summed in fixed blocks and the block sums reduced in order, so the
// result does not depend on how many threads ran.
constexpr std::size_t kRowBlock = 64;

enum class RowCurve { conditional, comparator };

AveragedCurve average_rows(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                           const KernelSpec& spec, const CounterfactualOptions& options, RowCurve kind) {
  if (xstar.dim() != sample.dim())
    throw Error(ErrorCode::dimension_mismatch, "counterfactual covariates and sample differ in dimension");
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::invalid_bandwidth, "bandwidth must be positive");

  const TieGroups ties(sample);
  const auto& knots = kind == RowCurve::conditional ? ties.event_times() : ties.times();
  const std::size_t m = knots.size();
  const std::size_t rows = xstar.size();
  const std::size_t blocks = (rows + kRowBlock - 1) / kRowBlock;

  struct BlockResult {
    std::vector<double> sum;
    std::size_t used = 0;
    std::size_t degenerate = 0;
    std::vector<std::size_t> dropped;
  };
  std::vector<BlockResult> results(blocks);

  parallel_for(blocks, options.threads, [&](std::size_t b) {
    BlockResult& out = results[b];
    out.sum.assign(m, 0.0);
    std::vector<double> weights;
    std::vector<double> values;
    const std::size_t stop = std::min(rows, (b + 1) * kRowBlock);
    for (std::size_t r = b * kRowBlock; r < stop; ++r) {
      const double total = kernel_row(xstar.row(r), sample.covariates(), h, spec, weights);
      if (std::fabs(total) < kEmptyNeighborhoodThreshold) {
        if (options.neighborhood == NeighborhoodPolicy::fail)
          throw Error(ErrorCode::empty_neighborhood,
                      "counterfactual row " + std::to_string(r) + " has no sample covariates within one bandwidth",
                      r);
        out.dropped.push_back(r);
        continue;
      }
      for (double& w : weights) w /= total;
      if (kind == RowCurve::conditional) {
        out.degenerate += beran_values(sample, ties, weights, options.variant, values);
      } else {
        weighted_ecdf_values(sample, ties, weights, false, values);
      }
      for (std::size_t k = 0; k < m; ++k) out.sum[k] += values[k];
      ++out.used;
    }
  });

  AveragedCurve avg;
  std::vector<double> total(m, 0.0);
  std::size_t used = 0;
  for (auto& block : results) {
    for (std::size_t k = 0; k < m; ++k) total[k] += block.sum[k];
    used += block.used;
    avg.degenerate_terms += block.degenerate;
    avg.dropped_rows.insert(avg.dropped_rows.end(), block.dropped.begin(), block.dropped.end());
  }
  if (used == 0)
    throw Error(ErrorCode::empty_neighborhood, "every counterfactual row lacks sample covariates within one bandwidth");
  for (double& v : total) v /= static_cast<double>(used);
  avg.curve = StepCurve::compressed(knots, total, 0.0);
  return avg;
}

CurveOnGrid on_grid(const AveragedCurve& avg, const Grid& grid, bool iso) {
  CurveOnGrid out;
  out.values = avg.curve.evaluate(grid);
  if (iso) out.values = isotonize(out.values);
  out.degenerate_terms = avg.degenerate_terms;
  out.dropped_rows = avg.dropped_rows;
  return out;
}

}  // namespace

AveragedCurve counterfactual_curve(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                                   const KernelSpec& spec, const CounterfactualOptions& options) {
  return average_rows(sample, xstar, h, spec, options, RowCurve::conditional);
}

CurveOnGrid counterfactual_cdf(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                               const KernelSpec& spec, const Grid& grid, const CounterfactualOptions& options) {
  return on_grid(counterfactual_curve(sample, xstar, h, spec, options), grid, options.isotonize);
}

AveragedCurve rothe_curve(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                          const KernelSpec& spec, const CounterfactualOptions& options) {
  return average_rows(sample, xstar, h, spec, options, RowCurve::comparator);
}

CurveOnGrid rothe_cdf(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                      const KernelSpec& spec, const Grid& grid, const CounterfactualOptions& options) {
  return on_grid(rothe_curve(sample, xstar, h, spec, options), grid, options.isotonize);
}

StepCurve oracle_cdf(const CensoredSample& latent_counterfactual) { return kaplan_meier(latent_counterfactual); }

std::vector<double> isotonize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  double running = -std::numeric_limits<double>::infinity();
  for (double& v : out) {
    running = std::max(running, v);
    v = std::clamp(running, 0.0, 1.0);
  }
  return out;
}

std::vector<double> cumulative_hazard(const Grid& grid, std::span<const double> cdf_values, HazardMethod method,
                                      const StepCurve* curve, OnDivergence on_divergence) {
  if (cdf_values.size() != grid.size())
    throw Error(ErrorCode::grid_mismatch, "CDF values and grid differ in length");
  if (method == HazardMethod::na_integral && curve == nullptr)
    throw Error(ErrorCode::invalid_argument, "the na-integral hazard needs the full step curve");

  const double ceiling = 1.0 - kHazardDivergenceThreshold;
  std::vector<double> out(grid.size(), std::numeric_limits<double>::quiet_NaN());

  std::size_t k = 0;
  double integral = 0.0;
  double previous = curve != nullptr ? curve->initial_value() : 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (cdf_values[g] >= ceiling) {
      if (on_divergence == OnDivergence::truncate) break;
      throw Error(ErrorCode::hazard_divergence,
                  "F(t) reaches 1 at t = " + std::to_string(grid[g]) + "; the cumulative hazard diverges");
    }
    if (method == HazardMethod::neg_log) {
      out[g] = -std::log1p(-cdf_values[g]);
      continue;
    }
    const auto& knots = curve->knots();
    const auto& values = curve->values();
    bool diverged = false;
    while (k < knots.size() && knots[k] <= grid[g]) {
      const double at_risk = 1.0 - previous;
      if (at_risk <= kHazardDivergenceThreshold) {
        diverged = true;
        break;
      }
      integral += (values[k] - previous) / at_risk;
      previous = values[k++];
    }
    if (diverged) {
      if (on_divergence == OnDivergence::truncate) break;
      throw Error(ErrorCode::hazard_divergence, "left limit of F reaches 1 before t = " + std::to_string(grid[g]));
    }
    out[g] = integral;
  }
  return out;
}

PolicyEffectCurves policy_effects(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                                  const KernelSpec& spec, const Grid& grid, HazardMethod hazard_method,
                                  const CounterfactualOptions& options) {
  const StepCurve km = kaplan_meier(sample);
  const AveragedCurve star = counterfactual_curve(sample, xstar, h, spec, options);

  PolicyEffectCurves out{grid, {}, {}, {}, {}, {}, {}, star.degenerate_terms, star.dropped_rows};
  out.f_base = km.evaluate(grid);
  out.f_star = star.curve.evaluate(grid);
  if (options.isotonize) out.f_star = isotonize(out.f_star);

  out.lambda_base = cumulative_hazard(grid, out.f_base, hazard_method, &km, OnDivergence::truncate);
  // An isotonized curve no longer matches its step representation, so the
  // integral form falls back to the grid values.
  if (options.isotonize && hazard_method == HazardMethod::na_integral) {
    const StepCurve iso = StepCurve::compressed(grid.points(), out.f_star, 0.0);
    out.lambda_star = cumulative_hazard(grid, out.f_star, hazard_method, &iso, OnDivergence::truncate);
  } else {
    out.lambda_star = cumulative_hazard(grid, out.f_star, hazard_method, &star.curve, OnDivergence::truncate);
  }

  out.delta_f.resize(grid.size());
  out.delta_lambda.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.delta_f[g] = out.f_star[g] - out.f_base[g];
    out.delta_lambda[g] = out.lambda_star[g] - out.lambda_base[g];
  }
  return out;
}

}  // namespace cfkm

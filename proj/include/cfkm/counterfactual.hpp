#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cfkm/core_data.hpp"
#include "cfkm/kernels.hpp"
#include "cfkm/survival.hpp"

namespace cfkm {

enum class NeighborhoodPolicy {
  fail,  ///< any X* row without kernel mass aborts with its row index
  drop,  ///< such rows are dropped and the mean is taken over the rest
};

enum class HazardMethod {
  neg_log,      ///< -log(1 - F(t))
  na_integral,  ///< sum over jumps <= t of dF / (1 - F^-)
};

enum class OnDivergence { fail, truncate };

std::string_view to_string(HazardMethod method) noexcept;
HazardMethod parse_hazard_method(std::string_view name);

struct CounterfactualOptions {
  ConditionalVariant variant = ConditionalVariant::exponential;
  NeighborhoodPolicy neighborhood = NeighborhoodPolicy::fail;
  /// Running maximum then clipping to [0, 1], applied to grid values only.
  bool isotonize = false;
  unsigned threads = 1;
};

/// Average of per-row curves, as a step function over the pooled knots.
struct AveragedCurve {
  StepCurve curve;
  std::size_t degenerate_terms = 0;
  std::vector<std::size_t> dropped_rows;
};

struct CurveOnGrid {
  std::vector<double> values;
  std::size_t degenerate_terms = 0;
  std::vector<std::size_t> dropped_rows;
};

/// F_{T*}(t) estimated as (1/n*) sum_i F_{T|X}(t | X*_i).
AveragedCurve counterfactual_curve(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                                   const KernelSpec& spec, const CounterfactualOptions& options = {});

CurveOnGrid counterfactual_cdf(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                               const KernelSpec& spec, const Grid& grid, const CounterfactualOptions& options = {});

/// Comparator that ignores censoring: the mean over X* rows of the
/// Nadaraya-Watson conditional ECDF of Y.
AveragedCurve rothe_curve(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                          const KernelSpec& spec, const CounterfactualOptions& options = {});

CurveOnGrid rothe_cdf(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                      const KernelSpec& spec, const Grid& grid, const CounterfactualOptions& options = {});

/// Product-limit estimator on the latent counterfactual observations
/// (Y*, delta*); infeasible outside simulations.
StepCurve oracle_cdf(const CensoredSample& latent_counterfactual);

/// Running maximum, then clip to [0, 1].
std::vector<double> isotonize(std::span<const double> values);

inline constexpr double kHazardDivergenceThreshold = 1e-12;

/// Cumulative hazard on the grid. `cdf_values` are F on the grid; the
/// na_integral method additionally needs the full step curve. Grid points with
/// F(t) >= 1 - 1e-12 either raise hazard_divergence or, when truncating, end
/// the valid prefix and come back as NaN.
std::vector<double> cumulative_hazard(const Grid& grid, std::span<const double> cdf_values, HazardMethod method,
                                      const StepCurve* curve = nullptr, OnDivergence on_divergence = OnDivergence::fail);

struct PolicyEffectCurves {
  Grid grid;
  std::vector<double> f_star;
  std::vector<double> f_base;
  std::vector<double> delta_f;
  std::vector<double> lambda_star;
  std::vector<double> lambda_base;
  std::vector<double> delta_lambda;
  std::size_t degenerate_terms = 0;
  std::vector<std::size_t> dropped_rows;
};

/// Bundles the unconditional and counterfactual curves, their hazards and the
/// differences. Hazards past a divergence point are NaN.
PolicyEffectCurves policy_effects(const CensoredSample& sample, const CounterfactualCovariates& xstar, double h,
                                  const KernelSpec& spec, const Grid& grid, HazardMethod hazard_method,
                                  const CounterfactualOptions& options = {});

}  // namespace cfkm

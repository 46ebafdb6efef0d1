#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cfkm/core_data.hpp"
#include "cfkm/kernels.hpp"
#include "cfkm/survival.hpp"

namespace cfkm {

struct InferenceOptions {
  /// Denominators 1 - F_Y(u-) and 1 - F_{Y|X}(u-|x) below this raise guard_violation.
  double guard = 1e-6;
  /// Inference is restricted to t <= zeta, the given quantile of uncensored durations.
  double zeta_quantile = 0.95;
  std::optional<double> zeta;
  ConditionalVariant variant = ConditionalVariant::exponential;
  unsigned threads = 1;
};

/// Running sum over jump points u <= t of dF^delta(u) / (1 - F(u-))^2.
/// Evaluating at or past `guard_limit` (the first jump whose denominator is
/// below the guard) raises guard_violation.
struct GuardedIntegral {
  StepCurve curve;
  double guard_limit = std::numeric_limits<double>::infinity();

  double at(double t) const;
};

/// Unconditional plug-ins: F_Y, F^delta_Y, the product-limit F_T and the
/// inner integral, plus the inference horizon zeta.
struct KmInfluence {
  StepCurve ecdf_y;
  StepCurve sub_ecdf_y;
  StepCurve km;
  GuardedIntegral integral;
  double zeta = 0.0;
  double guard = 1e-6;
  std::size_t n = 0;
};

KmInfluence make_km_influence(const CensoredSample& sample, const InferenceOptions& options = {});

/// Smallest uncensored duration whose rank among uncensored durations reaches
/// the quantile level (inverse-ECDF definition).
double uncensored_quantile(const CensoredSample& sample, double level);

/// Conditional plug-ins at one covariate point.
struct ConditionalPlugins {
  StepCurve f_tx;        ///< F_{T|X}(. | x)
  StepCurve f_yx;        ///< F_{Y|X}(. | x)
  StepCurve f_yx_delta;  ///< F^delta_{Y|X}(. | x)
  GuardedIntegral integral;
};

ConditionalPlugins make_conditional_plugins(const CensoredSample& sample, const TieGroups& ties,
                                            std::span<const double> weights, ConditionalVariant variant,
                                            double guard);

/// Everything the influence functions and covariance plug-ins need, built in
/// one pass over the sample and counterfactual rows.
struct InfluenceContext {
  CensoredSample sample;
  CounterfactualCovariates xstar;
  double h = 1.0;
  KernelSpec spec;
  InferenceOptions options;

  KmInfluence base;
  std::vector<ConditionalPlugins> at_sample;  ///< per sorted sample row X_i
  std::vector<StepCurve> f_tx_star;           ///< F_{T|X}(. | X*_r) per counterfactual row
  StepCurve f_star;                           ///< mean of f_tx_star
  std::vector<double> density_ratio;          ///< m*(X_i) / m(X_i) per sorted sample row
};

InfluenceContext make_influence_context(const CensoredSample& sample, const CounterfactualCovariates& xstar,
                                        double h, const KernelSpec& spec, const InferenceOptions& options = {});

/// Influence function of the product-limit estimator at t.
double influence_km(const KmInfluence& ctx, double y, int delta, double t);

/// The two addends of the counterfactual influence function: variation from
/// sampling X*, and the first-stage estimation term scaled by m*(x)/m(x).
struct InfluenceParts {
  double xstar_variation = 0.0;
  double estimation = 0.0;
  double total() const noexcept { return xstar_variation + estimation; }
};

InfluenceParts influence_counterfactual(const InfluenceContext& ctx, double y, int delta,
                                        std::span<const double> x, std::span<const double> xstar_row, double t);

/// Same quantity for sorted sample row i, paired with counterfactual row
/// `xstar_index`, using the cached plug-ins.
InfluenceParts influence_counterfactual_at(const InfluenceContext& ctx, std::size_t i, std::size_t xstar_index,
                                           double t);

/// Grid-sampled covariance kernel, row-major. Sigma11 and Sigma22 are
/// symmetric; the cross term Sigma12(u, u') generally is not.
struct CovarianceSurface {
  Grid grid;
  std::vector<double> matrix;

  double operator()(std::size_t a, std::size_t b) const noexcept { return matrix[a * grid.size() + b]; }
  std::vector<double> diagonal() const;
};

CovarianceSurface sigma11_hat(const InfluenceContext& ctx, const Grid& grid);
CovarianceSurface sigma22_hat(const KmInfluence& ctx, const Grid& grid);

/// Rows index the counterfactual time u, columns the unconditional time u'.
/// `include_pairing_term` adds the covariance between X* variation and the
/// unconditional influence function; it needs X* rows aligned with the sample.
CovarianceSurface sigma12_hat(const InfluenceContext& ctx, const Grid& grid, bool include_pairing_term);

struct Bands {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// estimate +/- z_{1 - alpha/2} sqrt(max(var, 0) / n). NaN variances give NaN bands.
Bands pointwise_ci(std::span<const double> estimates, std::span<const double> variance, std::size_t n,
                   double alpha);

double normal_quantile(double p);

/// Asymptotic variances (of sqrt(n) times the estimator) on the grid.
struct EffectVariances {
  std::vector<double> f_star;
  std::vector<double> f_base;
  std::vector<double> delta_f;
  std::vector<double> lambda_star;
  std::vector<double> lambda_base;
  std::vector<double> delta_lambda;
};

/// Combines the covariance diagonals; hazard variances use the delta-method
/// scaling psi / (1 - F).
EffectVariances effect_variances(const CovarianceSurface& sigma11, const CovarianceSurface& sigma22,
                                 const CovarianceSurface& sigma12, std::span<const double> f_star,
                                 std::span<const double> f_base);

}  // namespace cfkm

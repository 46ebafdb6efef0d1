#include "cfkm/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "cfkm/counterfactual.hpp"
#include "cfkm/error.hpp"
#include "cfkm/parallel.hpp"

namespace cfkm {

double GuardedIntegral::at(double t) const {
  if (t >= guard_limit)
    throw Error(ErrorCode::guard_violation,
                "at-risk mass 1 - F(u-) falls below the guard at u = " + std::to_string(guard_limit) +
                    " (requested t = " + std::to_string(t) + ")");
  return curve(t);
}

namespace {

GuardedIntegral inner_integral(const CensoredSample& sample, const TieGroups& ties,
                               std::span<const double> weights, double guard) {
  GuardedIntegral out;
  std::vector<double> knots;
  std::vector<double> values;
  double below = 0.0;  // F(u-) at the current group
  double integral = 0.0;
  for (std::size_t g = 0; g < ties.size(); ++g) {
    double jump = 0.0;
    double mass = 0.0;
    for (std::size_t j = ties.begin(g); j < ties.end(g); ++j) {
      mass += weights[j];
      if (sample.delta(j) == 1) jump += weights[j];
    }
    if (ties.events(g) > 0) {
      const double at_risk = 1.0 - below;
      if (at_risk < guard) {
        out.guard_limit = ties.time(g);
        break;
      }
      integral += jump / (at_risk * at_risk);
      knots.push_back(ties.time(g));
      values.push_back(integral);
    }
    below += mass;
  }
  out.curve = StepCurve::compressed(knots, values, 0.0);
  return out;
}

void check_horizon(double t, double zeta) {
  if (t > zeta)
    throw Error(ErrorCode::guard_violation, "t = " + std::to_string(t) + " lies beyond the inference horizon " +
                                                std::to_string(zeta));
}

// [1 - F_T(t)] [1{y <= t, delta = 1} / (1 - F_Y(y-)) - integral(y ^ t)], with
// conditional or unconditional plug-ins.
double influence_term(const StepCurve& f_t, const StepCurve& f_y, const GuardedIntegral& integral, double guard,
                      double y, int delta, double t) {
  double indicator = 0.0;
  if (delta == 1 && y <= t) {
    const double at_risk = 1.0 - f_y.left_limit(y);
    if (at_risk < guard)
      throw Error(ErrorCode::guard_violation,
                  "1 - F_Y(y-) below the guard at y = " + std::to_string(y));
    indicator = 1.0 / at_risk;
  }
  return (1.0 - f_t(t)) * (indicator - integral.at(std::min(y, t)));
}

double density_ratio(double mstar, double m) {
  if (!(m > kEmptyNeighborhoodThreshold))
    throw Error(ErrorCode::guard_violation, "estimated covariate density is not positive at a sample point");
  const double ratio = mstar / m;
  if (!std::isfinite(ratio)) throw Error(ErrorCode::guard_violation, "density ratio is not finite");
  return ratio;
}

}  // namespace

double uncensored_quantile(const CensoredSample& sample, double level) {
  if (!(level > 0.0 && level <= 1.0))
    throw Error(ErrorCode::invalid_argument, "quantile level must lie in (0, 1]");
  std::vector<double> events;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (sample.delta(i) == 1) events.push_back(sample.y(i));
  if (events.empty()) throw Error(ErrorCode::guard_violation, "no uncensored durations to define the horizon");
  const double m = static_cast<double>(events.size());
  auto k = static_cast<std::size_t>(std::ceil(level * m - 1e-9));
  k = std::clamp<std::size_t>(k, 1, events.size());
  return events[k - 1];
}

KmInfluence make_km_influence(const CensoredSample& sample, const InferenceOptions& options) {
  const TieGroups ties(sample);
  const std::vector<double> uniform(sample.size(), 1.0 / static_cast<double>(sample.size()));
  std::vector<double> values;

  KmInfluence ctx;
  weighted_ecdf_values(sample, ties, uniform, false, values);
  ctx.ecdf_y = StepCurve::compressed(ties.times(), values, 0.0);
  weighted_ecdf_values(sample, ties, uniform, true, values);
  ctx.sub_ecdf_y = StepCurve::compressed(ties.times(), values, 0.0);
  ctx.km = kaplan_meier(sample);
  ctx.integral = inner_integral(sample, ties, uniform, options.guard);
  ctx.zeta = options.zeta ? *options.zeta : uncensored_quantile(sample, options.zeta_quantile);
  ctx.guard = options.guard;
  ctx.n = sample.size();
  return ctx;
}

ConditionalPlugins make_conditional_plugins(const CensoredSample& sample, const TieGroups& ties,
                                            std::span<const double> weights, ConditionalVariant variant,
                                            double guard) {
  ConditionalPlugins out;
  std::vector<double> values;
  beran_values(sample, ties, weights, variant, values);
  out.f_tx = StepCurve::compressed(ties.event_times(), values, 0.0);
  weighted_ecdf_values(sample, ties, weights, false, values);
  out.f_yx = StepCurve::compressed(ties.times(), values, 0.0);
  weighted_ecdf_values(sample, ties, weights, true, values);
  out.f_yx_delta = StepCurve::compressed(ties.times(), values, 0.0);
  out.integral = inner_integral(sample, ties, weights, guard);
  return out;
}

InfluenceContext make_influence_context(const CensoredSample& sample, const CounterfactualCovariates& xstar,
                                        double h, const KernelSpec& spec, const InferenceOptions& options) {
  if (xstar.dim() != sample.dim())
    throw Error(ErrorCode::dimension_mismatch, "counterfactual covariates and sample differ in dimension");

  InfluenceContext ctx{sample, xstar, h, spec, options, make_km_influence(sample, options), {}, {}, {}, {}};
  const TieGroups ties(sample);
  const std::size_t n = sample.size();
  const double volume = static_cast<double>(n) * std::pow(h, static_cast<double>(spec.dim));

  ctx.at_sample.resize(n);
  ctx.density_ratio.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    std::vector<double> weights;
    const double total = kernel_row(sample.x(i), sample.covariates(), h, spec, weights);
    if (std::fabs(total) < kEmptyNeighborhoodThreshold)
      throw Error(ErrorCode::empty_neighborhood, "sample row " + std::to_string(i) + " has no kernel mass", i);
    for (double& w : weights) w /= total;
    ctx.at_sample[i] = make_conditional_plugins(sample, ties, weights, options.variant, options.guard);
    ctx.density_ratio[i] = density_ratio(density_estimate(sample.x(i), xstar.rows(), h, spec), total / volume);
  });

  ctx.f_tx_star.resize(xstar.size());
  parallel_for(xstar.size(), options.threads, [&](std::size_t r) {
    std::vector<double> weights;
    const double total = kernel_row(xstar.row(r), sample.covariates(), h, spec, weights);
    if (std::fabs(total) < kEmptyNeighborhoodThreshold)
      throw Error(ErrorCode::empty_neighborhood,
                  "counterfactual row " + std::to_string(r) + " has no sample covariates within one bandwidth", r);
    for (double& w : weights) w /= total;
    ctx.f_tx_star[r] = beran_from_weights(sample, ties, weights, options.variant).curve;
  });

  CounterfactualOptions cf;
  cf.variant = options.variant;
  cf.threads = options.threads;
  ctx.f_star = counterfactual_curve(sample, xstar, h, spec, cf).curve;
  return ctx;
}

double influence_km(const KmInfluence& ctx, double y, int delta, double t) {
  check_horizon(t, ctx.zeta);
  return influence_term(ctx.km, ctx.ecdf_y, ctx.integral, ctx.guard, y, delta, t);
}

InfluenceParts influence_counterfactual(const InfluenceContext& ctx, double y, int delta,
                                        std::span<const double> x, std::span<const double> xstar_row, double t) {
  check_horizon(t, ctx.base.zeta);
  const TieGroups ties(ctx.sample);

  const auto star_weights = nw_weights(xstar_row, ctx.sample.covariates(), ctx.h, ctx.spec);
  const auto star_curve = beran_from_weights(ctx.sample, ties, star_weights, ctx.options.variant).curve;

  std::vector<double> weights;
  const double total = kernel_row(x, ctx.sample.covariates(), ctx.h, ctx.spec, weights);
  if (std::fabs(total) < kEmptyNeighborhoodThreshold)
    throw Error(ErrorCode::empty_neighborhood, "no sample covariates within one bandwidth of x");
  for (double& w : weights) w /= total;
  const auto plugins = make_conditional_plugins(ctx.sample, ties, weights, ctx.options.variant, ctx.options.guard);
  const double volume = static_cast<double>(ctx.sample.size()) * std::pow(ctx.h, static_cast<double>(ctx.spec.dim));
  const double ratio = density_ratio(density_estimate(x, ctx.xstar.rows(), ctx.h, ctx.spec), total / volume);

  InfluenceParts parts;
  parts.xstar_variation = star_curve(t) - ctx.f_star(t);
  parts.estimation =
      influence_term(plugins.f_tx, plugins.f_yx, plugins.integral, ctx.options.guard, y, delta, t) * ratio;
  return parts;
}

InfluenceParts influence_counterfactual_at(const InfluenceContext& ctx, std::size_t i, std::size_t xstar_index,
                                           double t) {
  check_horizon(t, ctx.base.zeta);
  const auto& p = ctx.at_sample.at(i);
  InfluenceParts parts;
  parts.xstar_variation = ctx.f_tx_star.at(xstar_index)(t) - ctx.f_star(t);
  parts.estimation = influence_term(p.f_tx, p.f_yx, p.integral, ctx.options.guard, ctx.sample.y(i),
                                    ctx.sample.delta(i), t) *
                     ctx.density_ratio[i];
  return parts;
}

std::vector<double> CovarianceSurface::diagonal() const {
  std::vector<double> out(grid.size());
  for (std::size_t a = 0; a < grid.size(); ++a) out[a] = (*this)(a, a);
  return out;
}

CovarianceSurface sigma11_hat(const InfluenceContext& ctx, const Grid& grid) {
  check_horizon(grid.back(), ctx.base.zeta);
  const std::size_t G = grid.size();
  const std::size_t n = ctx.sample.size();
  const std::size_t nstar = ctx.xstar.size();

  const auto f_star = ctx.f_star.evaluate(grid);
  std::vector<double> variation(nstar * G);
  for (std::size_t r = 0; r < nstar; ++r) {
    const auto values = ctx.f_tx_star[r].evaluate(grid);
    for (std::size_t a = 0; a < G; ++a) variation[r * G + a] = values[a] - f_star[a];
  }
  std::vector<double> scaled(n * G);
  std::vector<double> integral(n * G);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ctx.at_sample[i];
    const auto f_tx = p.f_tx.evaluate(grid);
    for (std::size_t a = 0; a < G; ++a) {
      scaled[i * G + a] = ctx.density_ratio[i] * (1.0 - f_tx[a]);
      integral[i * G + a] = p.integral.at(grid[a]);
    }
  }

  CovarianceSurface out{grid, std::vector<double>(G * G, 0.0)};
  for (std::size_t a = 0; a < G; ++a) {
    for (std::size_t b = a; b < G; ++b) {
      double first = 0.0;
      for (std::size_t r = 0; r < nstar; ++r) first += variation[r * G + a] * variation[r * G + b];
      double second = 0.0;
      for (std::size_t i = 0; i < n; ++i) second += scaled[i * G + a] * scaled[i * G + b] * integral[i * G + a];
      const double value = first / static_cast<double>(nstar) + second / static_cast<double>(n);
      out.matrix[a * G + b] = value;
      out.matrix[b * G + a] = value;
    }
  }
  return out;
}

CovarianceSurface sigma22_hat(const KmInfluence& ctx, const Grid& grid) {
  check_horizon(grid.back(), ctx.zeta);
  const std::size_t G = grid.size();
  const auto f = ctx.km.evaluate(grid);
  std::vector<double> integral(G);
  for (std::size_t a = 0; a < G; ++a) integral[a] = ctx.integral.at(grid[a]);
  CovarianceSurface out{grid, std::vector<double>(G * G, 0.0)};
  for (std::size_t a = 0; a < G; ++a) {
    for (std::size_t b = a; b < G; ++b) {
      const double value = (1.0 - f[a]) * (1.0 - f[b]) * integral[a];
      out.matrix[a * G + b] = value;
      out.matrix[b * G + a] = value;
    }
  }
  return out;
}

CovarianceSurface sigma12_hat(const InfluenceContext& ctx, const Grid& grid, bool include_pairing_term) {
  check_horizon(grid.back(), ctx.base.zeta);
  const std::size_t G = grid.size();
  const std::size_t n = ctx.sample.size();
  if (include_pairing_term && ctx.xstar.size() != n)
    throw Error(ErrorCode::invalid_argument,
                "the pairing term needs one counterfactual row per sample record (X* = pi(X))");

  const auto f_star = ctx.f_star.evaluate(grid);
  std::vector<double> star(n * G);   // xi*(Y_i, delta_i; u, X_i) m*(X_i)/m(X_i)
  std::vector<double> base(n * G);   // xi(Y_i, delta_i; u')
  std::vector<double> paired(n * G); // F_{T|X}(u | X*_i) - F_{T*}(u)
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ctx.at_sample[i];
    const double y = ctx.sample.y(i);
    const int delta = ctx.sample.delta(i);
    for (std::size_t a = 0; a < G; ++a) {
      star[i * G + a] =
          influence_term(p.f_tx, p.f_yx, p.integral, ctx.options.guard, y, delta, grid[a]) * ctx.density_ratio[i];
      base[i * G + a] = influence_term(ctx.base.km, ctx.base.ecdf_y, ctx.base.integral, ctx.base.guard, y, delta,
                                       grid[a]);
    }
    if (include_pairing_term) {
      const auto values = ctx.f_tx_star[ctx.sample.original_index(i)].evaluate(grid);
      for (std::size_t a = 0; a < G; ++a) paired[i * G + a] = values[a] - f_star[a];
    }
  }

  CovarianceSurface out{grid, std::vector<double>(G * G, 0.0)};
  for (std::size_t a = 0; a < G; ++a) {
    for (std::size_t b = 0; b < G; ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double left = star[i * G + a];
        if (include_pairing_term) left += paired[i * G + a];
        sum += left * base[i * G + b];
      }
      out.matrix[a * G + b] = sum / static_cast<double>(n);
    }
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::invalid_argument, "normal quantile needs 0 < p < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Bands pointwise_ci(std::span<const double> estimates, std::span<const double> variance, std::size_t n,
                   double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  if (estimates.size() != variance.size())
    throw Error(ErrorCode::grid_mismatch, "estimates and variances differ in length");
  if (n == 0) throw Error(ErrorCode::invalid_argument, "sample size must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  Bands bands{std::vector<double>(estimates.size()), std::vector<double>(estimates.size())};
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    // std::max keeps a NaN first argument, so NaN variances propagate.
    const double half = z * std::sqrt(std::max(variance[k], 0.0) / static_cast<double>(n));
    bands.lower[k] = estimates[k] - half;
    bands.upper[k] = estimates[k] + half;
  }
  return bands;
}

EffectVariances effect_variances(const CovarianceSurface& sigma11, const CovarianceSurface& sigma22,
                                 const CovarianceSurface& sigma12, std::span<const double> f_star,
                                 std::span<const double> f_base) {
  const std::size_t G = sigma11.grid.size();
  if (sigma22.grid.size() != G || sigma12.grid.size() != G || f_star.size() != G || f_base.size() != G)
    throw Error(ErrorCode::grid_mismatch, "covariance surfaces and curves must share one grid");
  EffectVariances v;
  v.f_star = sigma11.diagonal();
  v.f_base = sigma22.diagonal();
  const auto cross = sigma12.diagonal();
  v.delta_f.resize(G);
  v.lambda_star.resize(G);
  v.lambda_base.resize(G);
  v.delta_lambda.resize(G);
  for (std::size_t a = 0; a < G; ++a) {
    v.delta_f[a] = v.f_star[a] + v.f_base[a] - 2.0 * cross[a];
    const double s_star = 1.0 - f_star[a];
    const double s_base = 1.0 - f_base[a];
    v.lambda_star[a] = v.f_star[a] / (s_star * s_star);
    v.lambda_base[a] = v.f_base[a] / (s_base * s_base);
    v.delta_lambda[a] = v.lambda_star[a] + v.lambda_base[a] - 2.0 * cross[a] / (s_star * s_base);
  }
  return v;
}

}  // namespace cfkm

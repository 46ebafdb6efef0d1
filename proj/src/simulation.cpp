#include "cfkm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cfkm/error.hpp"
#include "cfkm/parallel.hpp"
#include "cfkm/survival.hpp"

namespace cfkm {

std::array<double, 2> policy_map(double x1, double x2) noexcept {
  return {kPolicyShift + kPolicyScale * x1, kPolicyShift + kPolicyScale * x2};
}

double duration_map(double x1, double x2, double eps) noexcept {
  return 5.0 - 3.0 * x1 + 2.0 * x2 + eps * std::sqrt(x1 * x1 + x2 * x2);
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t replication) noexcept {
  return mix64(mix64(mix64(base_seed) ^ n) ^ replication);
}

double DgpRng::uniform() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(engine_() >> 11) + 0.5) * kScale;
}

double DgpRng::beta22() {
  const double a = uniform();
  const double b = uniform();
  const double c = uniform();
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

double DgpRng::exponential(double mean) { return -mean * std::log(uniform()); }

double DgpRng::standard_normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double DgpRng::lognormal(double mu, double sigma) { return std::exp(mu + sigma * standard_normal()); }

CensoredSample DgpDraw::oracle_sample() const {
  std::vector<Observation> obs;
  obs.reserve(latent.size());
  for (const auto& u : latent) obs.push_back({u.y_star, u.delta_star, {u.x1, u.x2}});
  return validate_sample(std::move(obs));
}

DgpDraw generate_draw(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::empty_sample, "simulation sample size must be positive");
  DgpRng rng(seed);
  DgpDraw draw;
  draw.latent.resize(n);
  std::vector<Observation> obs(n);
  std::vector<double> star(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    LatentUnit& u = draw.latent[i];
    u.x1 = rng.beta22();
    u.x2 = rng.beta22();
    u.eps = rng.exponential(2.0);
    u.c = rng.lognormal(2.5, 1.0);
    u.t = duration_map(u.x1, u.x2, u.eps);
    const auto xs = policy_map(u.x1, u.x2);
    u.t_star = duration_map(xs[0], xs[1], u.eps);
    u.y_star = std::min(u.t_star, u.c);
    u.delta_star = u.t_star <= u.c ? 1 : 0;
    obs[i] = {std::min(u.t, u.c), u.t <= u.c ? 1 : 0, {u.x1, u.x2}};
    star[2 * i] = xs[0];
    star[2 * i + 1] = xs[1];
  }
  draw.sample = validate_sample(std::move(obs));
  draw.xstar = CounterfactualCovariates(CovariateRows(2, std::move(star)), 2, n);
  return draw;
}

double conditional_cdf_truth(double t, double x1, double x2) noexcept {
  const double mu = 5.0 - 3.0 * x1 + 2.0 * x2;
  if (t < mu) return 0.0;
  const double s = std::sqrt(x1 * x1 + x2 * x2);
  if (s == 0.0) return 1.0;
  return -std::expm1(-(t - mu) / (2.0 * s));
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "Gauss-Legendre rule needs at least one node");
  std::vector<double> nodes(n);
  std::vector<double> weights(n);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nn + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = nn * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
      p0 = p1;
      p1 = p2;
    }
    dp = nn * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  return {std::move(nodes), std::move(weights)};
}

namespace {

double beta22_density(double u) noexcept { return 6.0 * u * (1.0 - u); }

// Integral over [0,1]^2 of F_{T|X}(t | shift + scale x) times the Beta(2,2)^2
// density. The support {mu <= t} is x2 <= (t - 5 + shift + 3 scale x1) / (2 scale),
// a line with slope 3/2; outer panels split where it crosses x2 = 0 and x2 = 1.
double population_cdf(double t, double shift, double scale, const std::vector<double>& nodes,
                      const std::vector<double>& weights) {
  auto upper = [&](double x1) {
    return std::clamp((t - 5.0 + shift + 3.0 * scale * x1) / (2.0 * scale), 0.0, 1.0);
  };
  std::vector<double> cuts{0.0};
  for (double c : {(5.0 - shift - t) / (3.0 * scale), (5.0 - shift - t + 2.0 * scale) / (3.0 * scale)})
    if (c > 0.0 && c < 1.0) cuts.push_back(c);
  cuts.push_back(1.0);

  double total = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double b = cuts[p + 1];
    if (upper(0.5 * (a + b)) <= 0.0) continue;
    double panel = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double x1 = 0.5 * (a + b) + 0.5 * (b - a) * nodes[i];
      const double top = upper(x1);
      if (top <= 0.0) continue;
      const double z1 = shift + scale * x1;
      double inner = 0.0;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double x2 = 0.5 * top * (1.0 + nodes[j]);
        inner += weights[j] * beta22_density(x2) * conditional_cdf_truth(t, z1, shift + scale * x2);
      }
      panel += weights[i] * beta22_density(x1) * 0.5 * top * inner;
    }
    total += 0.5 * (b - a) * panel;
  }
  return total;
}

}  // namespace

double truth_cdf(double t, Population population, std::size_t nodes) {
  const double shift = population == Population::observed ? 0.0 : kPolicyShift;
  const double scale = population == Population::observed ? 1.0 : kPolicyScale;
  const auto coarse = gauss_legendre(nodes);
  const auto fine = gauss_legendre(2 * nodes);
  const double a = population_cdf(t, shift, scale, coarse.first, coarse.second);
  const double b = population_cdf(t, shift, scale, fine.first, fine.second);
  if (std::fabs(a - b) > 1e-8)
    throw Error(ErrorCode::quadrature_nonconvergence,
                "truth quadrature at t = " + std::to_string(t) + " moved by " + std::to_string(std::fabs(a - b)) +
                    " under node doubling");
  return b;
}

TruthCurves truth_curves(const Grid& grid) {
  TruthCurves out;
  out.f_t.reserve(grid.size());
  out.f_star.reserve(grid.size());
  for (double t : grid.points()) {
    out.f_t.push_back(truth_cdf(t, Population::observed));
    out.f_star.push_back(truth_cdf(t, Population::counterfactual));
  }
  out.lambda_t = cumulative_hazard(grid, out.f_t, HazardMethod::neg_log);
  out.lambda_star = cumulative_hazard(grid, out.f_star, HazardMethod::neg_log);
  return out;
}

namespace {

double grid_step(const Grid& grid) {
  if (!grid.step()) throw Error(ErrorCode::invalid_grid, "integrated errors need an equidistant grid");
  return *grid.step();
}

void check_lengths(std::span<const double> est, std::span<const double> truth, const Grid& grid) {
  if (est.size() != grid.size() || truth.size() != grid.size())
    throw Error(ErrorCode::grid_mismatch, "estimate, truth and grid differ in length");
}

}  // namespace

double integrated_abs_error(std::span<const double> est, std::span<const double> truth, const Grid& grid) {
  check_lengths(est, truth, grid);
  double sum = 0.0;
  for (std::size_t g = 0; g < est.size(); ++g) sum += std::fabs(est[g] - truth[g]);
  return grid_step(grid) * sum;
}

double integrated_sq_error(std::span<const double> est, std::span<const double> truth, const Grid& grid) {
  check_lengths(est, truth, grid);
  double sum = 0.0;
  for (std::size_t g = 0; g < est.size(); ++g) sum += (est[g] - truth[g]) * (est[g] - truth[g]);
  return grid_step(grid) * sum;
}

double miae(std::span<const double> est, std::span<const double> truth, const Grid& grid) {
  return integrated_abs_error(est, truth, grid);
}

double rmise(std::span<const double> est, std::span<const double> truth, const Grid& grid) {
  return std::sqrt(integrated_sq_error(est, truth, grid));
}

ErrorSummary summarize_errors(std::span<const double> abs_integrals, std::span<const double> sq_integrals) {
  if (abs_integrals.size() != sq_integrals.size())
    throw Error(ErrorCode::invalid_argument, "error integral lists differ in length");
  ErrorSummary s;
  s.replications = abs_integrals.size();
  if (s.replications == 0) {
    s.miae = s.rmise = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double a = 0.0;
  double q = 0.0;
  for (std::size_t r = 0; r < s.replications; ++r) {
    a += abs_integrals[r];
    q += sq_integrals[r];
  }
  const double count = static_cast<double>(s.replications);
  s.miae = a / count;
  s.rmise = std::sqrt(q / count);
  return s;
}

std::string_view to_string(Estimator estimator) noexcept {
  switch (estimator) {
    case Estimator::km: return "km";
    case Estimator::counterfactual: return "counterfactual";
    case Estimator::oracle: return "oracle";
    case Estimator::rothe: return "rothe";
  }
  return "unknown";
}

std::string_view to_string(Target target) noexcept { return target == Target::cdf ? "cdf" : "hazard"; }

Estimator parse_estimator(std::string_view name) {
  for (auto e : {Estimator::km, Estimator::counterfactual, Estimator::oracle, Estimator::rothe})
    if (name == to_string(e)) return e;
  throw Error(ErrorCode::invalid_argument, "unknown estimator '" + std::string(name) + "'");
}

const ReportRow& SimulationReport::at(Target target, std::size_t n, Estimator estimator) const {
  for (const auto& row : rows)
    if (row.target == target && row.n == n && row.estimator == estimator) return row;
  throw Error(ErrorCode::invalid_argument, "report has no row for (" + std::string(to_string(target)) + ", " +
                                               std::to_string(n) + ", " + std::string(to_string(estimator)) + ")");
}

namespace {

struct CellResult {
  bool ok = false;
  double abs_error = 0.0;
  double sq_error = 0.0;
};

// Results for one replication: [estimator][target].
using ReplicationResult = std::vector<std::array<CellResult, 2>>;

struct EstimatedCurve {
  std::vector<double> values;
  StepCurve curve;
};

EstimatedCurve estimate(Estimator e, const DgpDraw& draw, double h, const KernelSpec& spec, const Grid& grid) {
  EstimatedCurve out;
  CounterfactualOptions opts;
  switch (e) {
    case Estimator::km: out.curve = kaplan_meier(draw.sample); break;
    case Estimator::counterfactual: out.curve = counterfactual_curve(draw.sample, draw.xstar, h, spec, opts).curve; break;
    case Estimator::oracle: out.curve = oracle_cdf(draw.oracle_sample()); break;
    case Estimator::rothe: out.curve = rothe_curve(draw.sample, draw.xstar, h, spec, opts).curve; break;
  }
  out.values = out.curve.evaluate(grid);
  return out;
}

[[noreturn]] void rethrow_with_context(const Error& err, std::size_t n, std::size_t r, Estimator e, Target target) {
  throw Error(err.code(), "n = " + std::to_string(n) + ", replication " + std::to_string(r) + ", " +
                              std::string(to_string(e)) + " " + std::string(to_string(target)) + ": " + err.what());
}

}  // namespace

SimulationReport run_study(const StudyConfig& config) {
  if (config.sizes.empty()) throw Error(ErrorCode::config, "study needs at least one sample size");
  if (config.replications == 0) throw Error(ErrorCode::config, "study needs at least one replication");
  if (config.estimators.empty()) throw Error(ErrorCode::config, "study needs at least one estimator");

  const Grid& grid = config.grid;
  const TruthCurves truth = truth_curves(grid);
  const KernelSpec spec{config.kernel, 2};

  SimulationReport report;
  report.config = config;
  std::vector<ReportRow> cdf_rows;
  std::vector<ReportRow> hazard_rows;

  for (std::size_t n : config.sizes) {
    const double h = config.bandwidth(n);
    std::vector<ReplicationResult> results(config.replications);

    parallel_for(config.replications, config.threads, [&](std::size_t r) {
      const DgpDraw draw = generate_draw(n, replication_seed(config.base_seed, n, r));
      ReplicationResult& out = results[r];
      out.resize(config.estimators.size());
      for (std::size_t k = 0; k < config.estimators.size(); ++k) {
        const Estimator e = config.estimators[k];
        const bool counterfactual_target = e != Estimator::km;
        const auto& f_true = counterfactual_target ? truth.f_star : truth.f_t;
        const auto& l_true = counterfactual_target ? truth.lambda_star : truth.lambda_t;

        EstimatedCurve est;
        try {
          est = estimate(e, draw, h, spec, grid);
          out[k][0] = {true, integrated_abs_error(est.values, f_true, grid),
                       integrated_sq_error(est.values, f_true, grid)};
        } catch (const Error& err) {
          if (config.strict) rethrow_with_context(err, n, r, e, Target::cdf);
          continue;
        }
        try {
          const auto lambda = cumulative_hazard(grid, est.values, config.hazard, &est.curve);
          out[k][1] = {true, integrated_abs_error(lambda, l_true, grid), integrated_sq_error(lambda, l_true, grid)};
        } catch (const Error& err) {
          if (config.strict) rethrow_with_context(err, n, r, e, Target::hazard);
        }
      }
    });

    for (std::size_t k = 0; k < config.estimators.size(); ++k) {
      for (int target = 0; target < 2; ++target) {
        std::vector<double> abs_errors;
        std::vector<double> sq_errors;
        for (const auto& rep : results) {
          const CellResult& cell = rep[k][static_cast<std::size_t>(target)];
          if (!cell.ok) continue;
          abs_errors.push_back(cell.abs_error);
          sq_errors.push_back(cell.sq_error);
        }
        const ErrorSummary s = summarize_errors(abs_errors, sq_errors);
        ReportRow row;
        row.target = target == 0 ? Target::cdf : Target::hazard;
        row.n = n;
        row.estimator = config.estimators[k];
        row.miae = s.miae;
        row.rmise = s.rmise;
        row.replications = s.replications;
        row.excluded = config.replications - s.replications;
        row.bandwidth = h;
        (target == 0 ? cdf_rows : hazard_rows).push_back(row);
      }
    }
  }

  report.rows = std::move(cdf_rows);
  report.rows.insert(report.rows.end(), hazard_rows.begin(), hazard_rows.end());
  return report;
}

}  // namespace cfkm

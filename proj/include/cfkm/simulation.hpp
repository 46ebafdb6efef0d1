#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfkm/core_data.hpp"
#include "cfkm/counterfactual.hpp"
#include "cfkm/kernels.hpp"

namespace cfkm {

// Design of the Monte Carlo study:
//   X1, X2 ~ Beta(2, 2), eps ~ Exponential(mean 2), C ~ LogNormal(2.5, 1), all independent
//   T  = 5 - 3 X1 + 2 X2 + eps * sqrt(X1^2 + X2^2),    Y = min(T, C), delta = 1{T <= C}
//   X* = 0.05 + 0.9 X,  T* = same map at X* with the same eps,  Y* = min(T*, C)

inline constexpr double kPolicyShift = 0.05;
inline constexpr double kPolicyScale = 0.9;

std::array<double, 2> policy_map(double x1, double x2) noexcept;
double duration_map(double x1, double x2, double eps) noexcept;

/// splitmix64 finalizer: x += 0x9E3779B97F4A7C15, then xor-shift-multiply with
/// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// mix64(mix64(mix64(base_seed) ^ n) ^ replication).
std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t replication) noexcept;

/// Samplers built on raw mt19937_64 output so streams are reproducible in any
/// language with a standard Mersenne Twister.
class DgpRng {
 public:
  explicit DgpRng(std::uint64_t seed) : engine_(seed) {}

  /// (k + 0.5) / 2^53 with k the top 53 bits of one engine output; never 0 or 1.
  double uniform();
  /// Median of three uniforms.
  double beta22();
  /// -mean * log(U).
  double exponential(double mean);
  /// Box-Muller cosine branch: sqrt(-2 log U1) cos(2 pi U2). Two uniforms per draw.
  double standard_normal();
  double lognormal(double mu, double sigma);

 private:
  std::mt19937_64 engine_;
};

struct LatentUnit {
  double x1 = 0.0;
  double x2 = 0.0;
  double eps = 0.0;
  double t = 0.0;
  double c = 0.0;
  double t_star = 0.0;
  double y_star = 0.0;
  int delta_star = 0;
};

/// One simulated data set. `latent` and `xstar` follow generation order, which
/// is the sample's input order (see CensoredSample::original_index).
struct DgpDraw {
  CensoredSample sample;
  CounterfactualCovariates xstar;
  std::vector<LatentUnit> latent;

  /// (Y*, delta*, X) for the oracle estimator.
  CensoredSample oracle_sample() const;
};

/// Per unit, draws in this order: X1 (3 uniforms), X2 (3), eps (1), C (2).
DgpDraw generate_draw(std::size_t n, std::uint64_t seed);

enum class Population { observed, counterfactual };

/// F_{T|X}(t | x) = 1 - exp(-(t - mu(x)) / (2 s(x))) for t >= mu(x), else 0,
/// with mu(x) = 5 - 3 x1 + 2 x2 and s(x) = sqrt(x1^2 + x2^2).
double conditional_cdf_truth(double t, double x1, double x2) noexcept;

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n);

/// F_T(t) or F_{T*}(t) by tensor Gauss-Legendre quadrature against the
/// Beta(2,2)^2 density, split along the support edge of F_{T|X}. Throws
/// quadrature_nonconvergence when doubling the nodes moves the result by more
/// than 1e-8.
double truth_cdf(double t, Population population, std::size_t nodes = 200);

struct TruthCurves {
  std::vector<double> f_t;
  std::vector<double> f_star;
  std::vector<double> lambda_t;
  std::vector<double> lambda_star;
};

TruthCurves truth_curves(const Grid& grid);

/// Rectangle rule: step * sum_g |est - truth| over the grid points.
double integrated_abs_error(std::span<const double> est, std::span<const double> truth, const Grid& grid);
/// Rectangle rule: step * sum_g (est - truth)^2.
double integrated_sq_error(std::span<const double> est, std::span<const double> truth, const Grid& grid);

/// Single-replication MIAE and RMISE.
double miae(std::span<const double> est, std::span<const double> truth, const Grid& grid);
double rmise(std::span<const double> est, std::span<const double> truth, const Grid& grid);

struct ErrorSummary {
  double miae = 0.0;
  double rmise = 0.0;
  std::size_t replications = 0;
};

/// MIAE = mean of absolute integrals; RMISE = sqrt(mean of squared integrals).
ErrorSummary summarize_errors(std::span<const double> abs_integrals, std::span<const double> sq_integrals);

enum class Estimator { km, counterfactual, oracle, rothe };
enum class Target { cdf, hazard };

std::string_view to_string(Estimator estimator) noexcept;
std::string_view to_string(Target target) noexcept;
Estimator parse_estimator(std::string_view name);

struct StudyConfig {
  std::vector<std::size_t> sizes{100, 200, 400, 800};
  std::size_t replications = 1000;
  std::uint64_t base_seed = 20240501;
  BandwidthRule bandwidth;
  KernelProfile kernel = KernelProfile::quartic4;
  Grid grid = Grid::uniform(4.25, 8.15, 0.05);
  std::vector<Estimator> estimators{Estimator::km, Estimator::counterfactual, Estimator::oracle, Estimator::rothe};
  HazardMethod hazard = HazardMethod::neg_log;
  /// When set, the first estimator failure aborts the study; otherwise the
  /// failing (replication, estimator, target) cell is excluded and counted.
  bool strict = true;
  unsigned threads = 1;
  std::string output;
};

struct ReportRow {
  Target target = Target::cdf;
  std::size_t n = 0;
  Estimator estimator = Estimator::km;
  double miae = 0.0;
  double rmise = 0.0;
  std::size_t replications = 0;
  std::size_t excluded = 0;
  double bandwidth = 0.0;
};

/// Rows ordered by target (cdf, hazard), then n, then the configured estimator order.
struct SimulationReport {
  StudyConfig config;
  std::vector<ReportRow> rows;

  const ReportRow& at(Target target, std::size_t n, Estimator estimator) const;
};

SimulationReport run_study(const StudyConfig& config);

}  // namespace cfkm

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfkm/core_data.hpp"
#include "cfkm/kernels.hpp"

namespace cfkm {

enum class ConditionalVariant {
  /// 1 - prod_j exp(-a_j): exponential of the kernel-weighted Nelson-Aalen hazard.
  exponential,
  /// 1 - prod_j (1 - a_j): the classical conditional product-limit form.
  product_limit,
};

struct ConditionalCurveRequest {
  std::vector<double> x;
  double h = 1.0;
  KernelSpec spec;
  ConditionalVariant variant = ConditionalVariant::exponential;
};

/// `degenerate_terms` counts uncensored records skipped because their
/// risk-set weight was below 1e-12 in absolute value.
struct ConditionalCurve {
  StepCurve curve;
  std::size_t degenerate_terms = 0;
};

/// Groups of sorted records sharing one duration.
class TieGroups {
 public:
  explicit TieGroups(const CensoredSample& sample);

  std::size_t size() const noexcept { return time_.size(); }
  std::size_t begin(std::size_t g) const noexcept { return start_[g]; }
  std::size_t end(std::size_t g) const noexcept { return start_[g + 1]; }
  double time(std::size_t g) const noexcept { return time_[g]; }
  std::size_t events(std::size_t g) const noexcept { return events_[g]; }

  /// Groups containing at least one uncensored record, ascending.
  const std::vector<std::size_t>& event_groups() const noexcept { return event_groups_; }
  /// Durations of event_groups(), ascending.
  const std::vector<double>& event_times() const noexcept { return event_times_; }
  const std::vector<double>& times() const noexcept { return time_; }

 private:
  std::vector<std::size_t> start_;
  std::vector<double> time_;
  std::vector<std::size_t> events_;
  std::vector<std::size_t> event_groups_;
  std::vector<double> event_times_;
};

inline constexpr double kDegenerateRiskThreshold = 1e-12;

/// Conditional CDF values at each event time given weights aligned with the
/// sorted sample. Returns the number of skipped degenerate terms.
std::size_t beran_values(const CensoredSample& sample, const TieGroups& ties, std::span<const double> weights,
                         ConditionalVariant variant, std::vector<double>& out);

/// Per-event-group exponent sum_{j in g, delta_j = 1} B_j / sum_{Y_l >= Y_g} B_l
/// (0 for degenerate groups).
std::vector<double> beran_exponents(const CensoredSample& sample, const TieGroups& ties,
                                    std::span<const double> weights);

/// Weighted empirical (sub-)CDF values at every tie group.
void weighted_ecdf_values(const CensoredSample& sample, const TieGroups& ties, std::span<const double> weights,
                          bool uncensored_only, std::vector<double>& out);

/// Unconditional product-limit estimator of F_T.
StepCurve kaplan_meier(const CensoredSample& sample);

/// Kernel-weighted conditional estimator of F_{T|X}(. | x).
ConditionalCurve beran_conditional(const CensoredSample& sample, const ConditionalCurveRequest& request);

/// Curve from explicit weights (aligned with the sorted sample).
ConditionalCurve beran_from_weights(const CensoredSample& sample, const TieGroups& ties,
                                    std::span<const double> weights, ConditionalVariant variant);

/// Nadaraya-Watson conditional CDF of Y given X = x, or of (Y, delta = 1)
/// when `uncensored_only` is set.
StepCurve conditional_ecdf(const CensoredSample& sample, std::span<const double> x, double h,
                           const KernelSpec& spec, bool uncensored_only);

}  // namespace cfkm

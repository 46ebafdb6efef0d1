#include "cfkm/survival.hpp"

#include <cmath>
#include <string>

#include "cfkm/error.hpp"

namespace cfkm {

TieGroups::TieGroups(const CensoredSample& sample) {
  const std::size_t n = sample.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t events = 0;
    while (j < n && sample.y(j) == sample.y(i)) events += static_cast<std::size_t>(sample.delta(j++));
    if (events > 0) {
      event_groups_.push_back(time_.size());
      event_times_.push_back(sample.y(i));
    }
    start_.push_back(i);
    time_.push_back(sample.y(i));
    events_.push_back(events);
    i = j;
  }
  start_.push_back(n);
}

namespace {

// Risk-set weight sum_{Y_l >= Y_g} B_l for each event group.
std::vector<double> risk_weights(const TieGroups& ties, std::span<const double> weights) {
  const auto& event_groups = ties.event_groups();
  std::vector<double> risk(event_groups.size());
  double suffix = 0.0;
  std::size_t e = event_groups.size();
  for (std::size_t g = ties.size(); g-- > 0;) {
    for (std::size_t j = ties.begin(g); j < ties.end(g); ++j) suffix += weights[j];
    if (e > 0 && event_groups[e - 1] == g) risk[--e] = suffix;
  }
  return risk;
}

void check_weights(const CensoredSample& sample, std::span<const double> weights) {
  if (weights.size() != sample.size())
    throw Error(ErrorCode::dimension_mismatch, "weight vector length differs from the sample size");
}

}  // namespace

std::vector<double> beran_exponents(const CensoredSample& sample, const TieGroups& ties,
                                    std::span<const double> weights) {
  check_weights(sample, weights);
  const auto risk = risk_weights(ties, weights);
  const auto& event_groups = ties.event_groups();
  std::vector<double> exponents(event_groups.size(), 0.0);
  for (std::size_t e = 0; e < event_groups.size(); ++e) {
    if (std::fabs(risk[e]) < kDegenerateRiskThreshold) continue;
    const std::size_t g = event_groups[e];
    double jump = 0.0;
    for (std::size_t j = ties.begin(g); j < ties.end(g); ++j)
      if (sample.delta(j) == 1) jump += weights[j];
    exponents[e] = jump / risk[e];
  }
  return exponents;
}

std::size_t beran_values(const CensoredSample& sample, const TieGroups& ties, std::span<const double> weights,
                         ConditionalVariant variant, std::vector<double>& out) {
  check_weights(sample, weights);
  const auto risk = risk_weights(ties, weights);
  const auto& event_groups = ties.event_groups();
  out.resize(event_groups.size());

  std::size_t degenerate = 0;
  double cumulative = 0.0;  // sum of exponents, or running survival product
  double survival = 1.0;
  for (std::size_t e = 0; e < event_groups.size(); ++e) {
    const std::size_t g = event_groups[e];
    if (std::fabs(risk[e]) < kDegenerateRiskThreshold) {
      degenerate += ties.events(g);
    } else if (variant == ConditionalVariant::exponential) {
      double jump = 0.0;
      for (std::size_t j = ties.begin(g); j < ties.end(g); ++j)
        if (sample.delta(j) == 1) jump += weights[j];
      cumulative += jump / risk[e];
    } else {
      for (std::size_t j = ties.begin(g); j < ties.end(g); ++j)
        if (sample.delta(j) == 1) survival *= 1.0 - weights[j] / risk[e];
    }
    out[e] = variant == ConditionalVariant::exponential ? 1.0 - std::exp(-cumulative) : 1.0 - survival;
  }
  return degenerate;
}

void weighted_ecdf_values(const CensoredSample& sample, const TieGroups& ties, std::span<const double> weights,
                          bool uncensored_only, std::vector<double>& out) {
  check_weights(sample, weights);
  out.resize(ties.size());
  double total = 0.0;
  for (std::size_t g = 0; g < ties.size(); ++g) {
    for (std::size_t j = ties.begin(g); j < ties.end(g); ++j)
      if (!uncensored_only || sample.delta(j) == 1) total += weights[j];
    out[g] = total;
  }
}

StepCurve kaplan_meier(const CensoredSample& sample) {
  // Sorted-index form: each uncensored record at rank j (1-based) contributes
  // the factor (n - j) / (n - j + 1).
  const std::size_t n = sample.size();
  std::vector<double> knots;
  std::vector<double> values;
  double survival = 1.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    bool jumped = false;
    while (j < n && sample.y(j) == sample.y(i)) {
      if (sample.delta(j) == 1) {
        const double remaining = static_cast<double>(n - j - 1);
        survival *= remaining / (remaining + 1.0);
        jumped = true;
      }
      ++j;
    }
    if (jumped) {
      knots.push_back(sample.y(i));
      values.push_back(1.0 - survival);
    }
    i = j;
  }
  return StepCurve(std::move(knots), std::move(values), 0.0);
}

ConditionalCurve beran_from_weights(const CensoredSample& sample, const TieGroups& ties,
                                    std::span<const double> weights, ConditionalVariant variant) {
  std::vector<double> values;
  const std::size_t degenerate = beran_values(sample, ties, weights, variant, values);
  return {StepCurve::compressed(ties.event_times(), values, 0.0), degenerate};
}

ConditionalCurve beran_conditional(const CensoredSample& sample, const ConditionalCurveRequest& request) {
  const auto weights = nw_weights(request.x, sample.covariates(), request.h, request.spec);
  return beran_from_weights(sample, TieGroups(sample), weights, request.variant);
}

StepCurve conditional_ecdf(const CensoredSample& sample, std::span<const double> x, double h,
                           const KernelSpec& spec, bool uncensored_only) {
  const auto weights = nw_weights(x, sample.covariates(), h, spec);
  const TieGroups ties(sample);
  std::vector<double> values;
  weighted_ecdf_values(sample, ties, weights, uncensored_only, values);
  return StepCurve::compressed(ties.times(), values, 0.0);
}

}  // namespace cfkm

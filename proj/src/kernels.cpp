#include "cfkm/kernels.hpp"

#include <cmath>
#include <string>

#include "cfkm/error.hpp"

namespace cfkm {

std::string_view to_string(KernelProfile profile) noexcept {
  switch (profile) {
    case KernelProfile::quartic4: return "quartic4";
    case KernelProfile::epanechnikov: return "epanechnikov";
  }
  return "unknown";
}

KernelProfile parse_kernel_profile(std::string_view name) {
  if (name == "quartic4") return KernelProfile::quartic4;
  if (name == "epanechnikov") return KernelProfile::epanechnikov;
  throw Error(ErrorCode::invalid_argument, "unknown kernel '" + std::string(name) + "'");
}

double profile_value(KernelProfile profile, double u) noexcept {
  if (!(std::fabs(u) < 1.0)) return 0.0;
  const double u2 = u * u;
  switch (profile) {
    case KernelProfile::quartic4: return (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2);
    case KernelProfile::epanechnikov: return 0.75 * (1.0 - u2);
  }
  return 0.0;
}

double kernel_value(const KernelSpec& spec, std::span<const double> u) {
  if (u.size() != spec.dim)
    throw Error(ErrorCode::dimension_mismatch, "kernel argument has dimension " + std::to_string(u.size()) +
                                                   ", kernel expects " + std::to_string(spec.dim));
  double value = 1.0;
  for (double ul : u) {
    value *= profile_value(spec.profile, ul);
    if (value == 0.0) return 0.0;
  }
  return value;
}

double BandwidthRule::operator()(std::size_t n) const {
  if (fixed) {
    if (!(*fixed > 0.0) || !std::isfinite(*fixed))
      throw Error(ErrorCode::invalid_bandwidth, "bandwidth must be positive");
    return *fixed;
  }
  if (n == 0) throw Error(ErrorCode::invalid_bandwidth, "bandwidth rule needs n >= 1");
  const double h = constant * std::pow(static_cast<double>(n), -exponent);
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::invalid_bandwidth, "bandwidth rule produced h <= 0");
  return h;
}

double default_bandwidth(std::size_t n) { return BandwidthRule{}(n); }

namespace {

void check_inputs(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::invalid_bandwidth, "bandwidth must be positive");
  if (x.size() != spec.dim || rows.dim() != spec.dim)
    throw Error(ErrorCode::dimension_mismatch, "evaluation point, covariates and kernel disagree on dimension");
}

}  // namespace

double kernel_row(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec,
                  std::vector<double>& out) {
  check_inputs(x, rows, h, spec);
  const std::size_t n = rows.size();
  const std::size_t d = spec.dim;
  const double inv_h = 1.0 / h;
  const double* data = rows.flat().data();
  out.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data + i * d;
    double value = 1.0;
    for (std::size_t l = 0; l < d && value != 0.0; ++l) value *= profile_value(spec.profile, (x[l] - xi[l]) * inv_h);
    out[i] = value;
    total += value;
  }
  return total;
}

void nw_weights_into(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec,
                     std::vector<double>& out) {
  const double total = kernel_row(x, rows, h, spec, out);
  if (std::fabs(total) < kEmptyNeighborhoodThreshold)
    throw Error(ErrorCode::empty_neighborhood, "no sample covariates within one bandwidth of the evaluation point");
  for (double& w : out) w /= total;
}

std::vector<double> nw_weights(std::span<const double> x, const CovariateRows& rows, double h,
                               const KernelSpec& spec) {
  std::vector<double> out;
  nw_weights_into(x, rows, h, spec, out);
  return out;
}

double density_estimate(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec) {
  std::vector<double> scratch;
  const double total = kernel_row(x, rows, h, spec, scratch);
  return total / (static_cast<double>(rows.size()) * std::pow(h, static_cast<double>(spec.dim)));
}

}  // namespace cfkm

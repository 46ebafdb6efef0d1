#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cfkm/core_data.hpp"

namespace cfkm {

enum class KernelProfile {
  /// k(u) = (15/32)(3 - 10u^2 + 7u^4) on |u| < 1; fourth order, negative for |u| > sqrt(3/7).
  quartic4,
  /// k(u) = (3/4)(1 - u^2) on |u| < 1; second order and nonnegative.
  epanechnikov,
};

std::string_view to_string(KernelProfile profile) noexcept;
KernelProfile parse_kernel_profile(std::string_view name);

/// Product kernel K(u) = prod_l k(u_l) supported on [-1, 1]^dim.
struct KernelSpec {
  KernelProfile profile = KernelProfile::quartic4;
  std::size_t dim = 1;

  int order() const noexcept { return profile == KernelProfile::quartic4 ? 4 : 2; }

  static KernelSpec quartic4(std::size_t dim) { return {KernelProfile::quartic4, dim}; }
  static KernelSpec epanechnikov(std::size_t dim) { return {KernelProfile::epanechnikov, dim}; }
};

double profile_value(KernelProfile profile, double u) noexcept;

double kernel_value(const KernelSpec& spec, std::span<const double> u);

/// h = constant * n^(-exponent), or a fixed value when set.
struct BandwidthRule {
  double constant = 3.0;
  double exponent = 1.0 / 7.0;
  std::optional<double> fixed;

  double operator()(std::size_t n) const;
};

/// 3 n^(-1/7).
double default_bandwidth(std::size_t n);

/// Unnormalized kernel values K((x - X_l)/h) for every row, written into `out`.
/// Returns their sum.
double kernel_row(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec,
                  std::vector<double>& out);

/// Nadaraya-Watson weights B_l(x; h). Weights can be negative for a
/// higher-order kernel. Throws empty_neighborhood when |sum_i K| < 1e-12.
std::vector<double> nw_weights(std::span<const double> x, const CovariateRows& rows, double h,
                               const KernelSpec& spec);
void nw_weights_into(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec,
                     std::vector<double>& out);

/// (1 / (n h^d)) sum_i K((x - X_i)/h).
double density_estimate(std::span<const double> x, const CovariateRows& rows, double h, const KernelSpec& spec);

inline constexpr double kEmptyNeighborhoodThreshold = 1e-12;

}  // namespace cfkm

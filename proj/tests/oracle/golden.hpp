#pragma once

#include <string>
#include <vector>

#include "cfkm/core_data.hpp"

namespace cfkm::golden {

/// A small corpus file pair with a bandwidth wide enough that every quartic
/// weight is positive (covariates lie in [0, 1], so |u| <= 1/2 < sqrt(3/7)).
struct Case {
  std::string name;
  CensoredSample sample;
  CounterfactualCovariates xstar;
  double h = 2.0;
  /// 0, every distinct duration, and the midpoints between them.
  Grid grid{std::vector<double>{0.0}};
};

std::vector<Case> cases();
Case load(const std::string& name);

std::string golden_path(const std::string& file);
std::string data_path(const std::string& file);
std::string config_path(const std::string& file);

}  // namespace cfkm::golden

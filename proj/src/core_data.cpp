#include "cfkm/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cfkm/error.hpp"

namespace cfkm {

CovariateRows::CovariateRows(std::size_t dim, std::vector<double> flat)
    : dim_(dim), flat_(std::move(flat)) {
  if (dim_ == 0) throw Error(ErrorCode::dimension_mismatch, "covariate dimension must be >= 1");
  if (flat_.size() % dim_ != 0)
    throw Error(ErrorCode::ragged_covariates, "flat covariate buffer is not a multiple of the dimension");
  for (std::size_t k = 0; k < flat_.size(); ++k) {
    if (!std::isfinite(flat_[k]))
      throw Error(ErrorCode::non_finite_value, "non-finite covariate value", k / dim_);
  }
}

CovariateRows CovariateRows::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error(ErrorCode::empty_sample, "no covariate rows");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw Error(ErrorCode::ragged_covariates,
                  "covariate row " + std::to_string(i) + " has length " + std::to_string(rows[i].size()) +
                      ", expected " + std::to_string(d),
                  i);
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return CovariateRows(d, std::move(flat));
}

Observation CensoredSample::observation(std::size_t i) const {
  auto row = x(i);
  return {y_[i], delta_[i], std::vector<double>(row.begin(), row.end())};
}

CensoredSample validate_sample(std::vector<Observation> observations) {
  if (observations.empty()) throw Error(ErrorCode::empty_sample, "empty sample");
  const std::size_t d = observations.front().x.size();
  if (d == 0) throw Error(ErrorCode::ragged_covariates, "observations need at least one covariate", 0);

  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    if (!std::isfinite(obs.y))
      throw Error(ErrorCode::non_finite_value, "non-finite duration in record " + std::to_string(i), i);
    if (obs.y < 0.0)
      throw Error(ErrorCode::negative_duration, "negative duration in record " + std::to_string(i), i);
    if (obs.delta != 0 && obs.delta != 1)
      throw Error(ErrorCode::non_binary_delta,
                  "censoring indicator must be 0 or 1 in record " + std::to_string(i), i);
    if (obs.x.size() != d)
      throw Error(ErrorCode::ragged_covariates,
                  "record " + std::to_string(i) + " has " + std::to_string(obs.x.size()) +
                      " covariates, expected " + std::to_string(d),
                  i);
    for (double v : obs.x)
      if (!std::isfinite(v))
        throw Error(ErrorCode::non_finite_value, "non-finite covariate in record " + std::to_string(i), i);
  }

  std::vector<std::size_t> order(observations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Uncensored before censored at tied durations; input order breaks the rest.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = observations[a];
    const auto& ob = observations[b];
    if (oa.y != ob.y) return oa.y < ob.y;
    return oa.delta > ob.delta;
  });

  CensoredSample sample;
  sample.y_.reserve(order.size());
  sample.delta_.reserve(order.size());
  std::vector<double> flat;
  flat.reserve(order.size() * d);
  for (std::size_t idx : order) {
    const auto& obs = observations[idx];
    sample.y_.push_back(obs.y);
    sample.delta_.push_back(obs.delta);
    flat.insert(flat.end(), obs.x.begin(), obs.x.end());
  }
  sample.x_ = CovariateRows(d, std::move(flat));
  sample.order_ = std::move(order);
  return sample;
}

CounterfactualCovariates::CounterfactualCovariates(CovariateRows rows, std::size_t expected_dim,
                                                   std::optional<std::size_t> required_count)
    : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(ErrorCode::empty_sample, "no counterfactual covariate rows");
  if (rows_.dim() != expected_dim)
    throw Error(ErrorCode::dimension_mismatch,
                "counterfactual covariates have dimension " + std::to_string(rows_.dim()) +
                    ", sample has " + std::to_string(expected_dim));
  if (required_count && rows_.size() != *required_count)
    throw Error(ErrorCode::dimension_mismatch,
                "counterfactual row count " + std::to_string(rows_.size()) + " differs from sample size " +
                    std::to_string(*required_count) + " (allow unequal counts explicitly)");
}

CounterfactualCovariates CounterfactualCovariates::for_sample(CovariateRows rows, const CensoredSample& sample,
                                                              bool allow_unequal_count) {
  std::optional<std::size_t> required;
  if (!allow_unequal_count) required = sample.size();
  return CounterfactualCovariates(std::move(rows), sample.dim(), required);
}

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorCode::invalid_grid, "evaluation grid is empty");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i]) || points_[i] < 0.0)
      throw Error(ErrorCode::invalid_grid, "grid points must be finite and nonnegative");
    if (i > 0 && !(points_[i] > points_[i - 1]))
      throw Error(ErrorCode::invalid_grid, "grid points must be strictly increasing (no duplicates)");
  }
}

namespace {

// Smallest power of ten turning both start and step into integers, so decimal
// grids like 4.25:8.15:0.05 land on the doubles nearest their decimal values.
std::optional<int> decimal_places(double start, double step) {
  double scale = 1.0;
  for (int p = 0; p <= 9; ++p, scale *= 10.0) {
    const double a = start * scale;
    const double b = step * scale;
    if (std::fabs(a - std::round(a)) < 1e-7 && std::fabs(b - std::round(b)) < 1e-7) return p;
  }
  return std::nullopt;
}

}  // namespace

Grid Grid::uniform(double start, double stop, double step) {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step) || step <= 0.0 || stop < start)
    throw Error(ErrorCode::invalid_grid, "grid needs finite start <= stop and step > 0");
  const double span = (stop - start) / step;
  const double count_real = std::round(span);
  if (std::fabs(span - count_real) > 1e-6)
    throw Error(ErrorCode::invalid_grid, "grid stop is not reachable from start in whole steps");
  const auto count = static_cast<std::size_t>(count_real) + 1;

  std::vector<double> pts(count);
  if (auto places = decimal_places(start, step)) {
    const double scale = std::pow(10.0, *places);
    const double a = std::round(start * scale);
    const double b = std::round(step * scale);
    for (std::size_t k = 0; k < count; ++k) pts[k] = (a + static_cast<double>(k) * b) / scale;
  } else {
    for (std::size_t k = 0; k < count; ++k) pts[k] = start + static_cast<double>(k) * step;
  }
  Grid grid(std::move(pts));
  grid.step_ = step;
  return grid;
}

std::optional<Grid> Grid::truncated(double limit) const {
  auto end = std::upper_bound(points_.begin(), points_.end(), limit);
  if (end == points_.begin()) return std::nullopt;
  Grid out(std::vector<double>(points_.begin(), end));
  out.step_ = step_;
  return out;
}

void check_grid_support(const Grid& grid, const CensoredSample& sample) {
  if (grid.back() > sample.max_y())
    throw Error(ErrorCode::invalid_grid, "grid extends past the largest observed duration");
}

StepCurve::StepCurve(std::vector<double> knots, std::vector<double> values, double initial_value)
    : knots_(std::move(knots)), values_(std::move(values)), initial_(initial_value) {
  if (knots_.size() != values_.size())
    throw Error(ErrorCode::invalid_argument, "step curve needs one value per knot");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i])) throw Error(ErrorCode::non_finite_value, "non-finite step-curve knot");
    if (i > 0 && !(knots_[i] > knots_[i - 1]))
      throw Error(ErrorCode::invalid_argument, "step-curve knots must be strictly increasing");
  }
}

StepCurve StepCurve::compressed(std::span<const double> knots, std::span<const double> values,
                                double initial_value) {
  std::vector<double> k;
  std::vector<double> v;
  double prev = initial_value;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (values[i] == prev) continue;
    k.push_back(knots[i]);
    v.push_back(values[i]);
    prev = values[i];
  }
  return StepCurve(std::move(k), std::move(v), initial_value);
}

double StepCurve::operator()(double t) const noexcept {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double StepCurve::left_limit(double t) const noexcept {
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

std::vector<double> StepCurve::evaluate(const Grid& grid) const {
  std::vector<double> out(grid.size());
  std::size_t k = 0;
  double current = initial_;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (k < knots_.size() && knots_[k] <= grid[g]) current = values_[k++];
    out[g] = current;
  }
  return out;
}

}  // namespace cfkm

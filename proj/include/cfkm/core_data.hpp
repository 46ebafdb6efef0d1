#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cfkm {

/// One censored record: observed duration y = min(T, C), delta = 1[T <= C],
/// and the covariate vector x.
struct Observation {
  double y = 0.0;
  int delta = 0;
  std::vector<double> x;
};

/// Row-major matrix of covariate vectors sharing one dimension.
class CovariateRows {
 public:
  CovariateRows() = default;
  CovariateRows(std::size_t dim, std::vector<double> flat);

  /// Throws ragged_covariates when rows differ in length, empty_sample when
  /// there are no rows.
  static CovariateRows from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : flat_.size() / dim_; }
  bool empty() const noexcept { return flat_.empty(); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {flat_.data() + i * dim_, dim_};
  }
  const std::vector<double>& flat() const noexcept { return flat_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> flat_;
};

/// A validated sample, stored sorted by y ascending with uncensored records
/// ahead of censored ones at equal y. `original_index(i)` maps the i-th sorted
/// record back to its position in the input.
class CensoredSample {
 public:
  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return x_.dim(); }

  double y(std::size_t i) const noexcept { return y_[i]; }
  int delta(std::size_t i) const noexcept { return delta_[i]; }
  std::span<const double> x(std::size_t i) const noexcept { return x_.row(i); }
  std::size_t original_index(std::size_t i) const noexcept { return order_[i]; }

  const std::vector<double>& ys() const noexcept { return y_; }
  const std::vector<int>& deltas() const noexcept { return delta_; }
  const CovariateRows& covariates() const noexcept { return x_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  Observation observation(std::size_t i) const;
  double max_y() const noexcept { return y_.back(); }

 private:
  friend CensoredSample validate_sample(std::vector<Observation> observations);

  std::vector<double> y_;
  std::vector<int> delta_;
  CovariateRows x_;
  std::vector<std::size_t> order_;
};

/// Checks every record and returns the canonically sorted sample. Errors carry
/// the 0-based input index of the offending record.
CensoredSample validate_sample(std::vector<Observation> observations);

/// Draws of X*. Rows are aligned with the sample's input order when X* is a
/// unit-level map of X; the pairing matters only for the cross-covariance.
class CounterfactualCovariates {
 public:
  CounterfactualCovariates() = default;

  /// Requires rows().size() == sample.size() unless `allow_unequal_count`.
  CounterfactualCovariates(CovariateRows rows, std::size_t expected_dim,
                           std::optional<std::size_t> required_count);

  static CounterfactualCovariates for_sample(CovariateRows rows, const CensoredSample& sample,
                                             bool allow_unequal_count = false);

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t dim() const noexcept { return rows_.dim(); }
  std::span<const double> row(std::size_t i) const noexcept { return rows_.row(i); }
  const CovariateRows& rows() const noexcept { return rows_; }

 private:
  CovariateRows rows_;
};

class Grid {
 public:
  /// Points must be finite, nonnegative, strictly increasing, and nonempty.
  explicit Grid(std::vector<double> points);

  /// Equidistant grid start, start + step, ..., stop. The stop value must be
  /// reached within rounding; decimal inputs yield the nearest doubles.
  static Grid uniform(double start, double stop, double step);

  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const noexcept { return points_[i]; }
  const std::vector<double>& points() const noexcept { return points_; }
  std::optional<double> step() const noexcept { return step_; }
  double front() const noexcept { return points_.front(); }
  double back() const noexcept { return points_.back(); }

  /// Leading sub-grid of points <= limit; nullopt when none qualify.
  std::optional<Grid> truncated(double limit) const;

 private:
  std::vector<double> points_;
  std::optional<double> step_;
};

/// Rejects grids reaching past the largest observed duration.
void check_grid_support(const Grid& grid, const CensoredSample& sample);

/// Right-continuous step function with left limits.
class StepCurve {
 public:
  StepCurve() = default;
  StepCurve(std::vector<double> knots, std::vector<double> values, double initial_value = 0.0);

  /// Builds a curve from per-knot values, dropping knots whose value repeats
  /// the previous segment.
  static StepCurve compressed(std::span<const double> knots, std::span<const double> values,
                              double initial_value = 0.0);

  double operator()(double t) const noexcept;
  double left_limit(double t) const noexcept;

  /// Evaluates on a sorted grid by a single merge pass.
  std::vector<double> evaluate(const Grid& grid) const;

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double initial_value() const noexcept { return initial_; }
  std::size_t size() const noexcept { return knots_.size(); }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

inline double eval_step(const StepCurve& curve, double t) noexcept { return curve(t); }
inline double left_limit(const StepCurve& curve, double t) noexcept { return curve.left_limit(t); }

}  // namespace cfkm

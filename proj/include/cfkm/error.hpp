#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cfkm {

enum class ErrorCode {
  negative_duration,
  non_binary_delta,
  ragged_covariates,
  empty_sample,
  non_finite_value,
  invalid_grid,
  grid_mismatch,
  dimension_mismatch,
  invalid_bandwidth,
  empty_neighborhood,
  hazard_divergence,
  guard_violation,
  invalid_argument,
  quadrature_nonconvergence,
  estimator_failure,
  csv_schema,
  csv_parse,
  io,
  config,
};

/// Stable identifier used in machine-readable error records.
std::string_view to_string(ErrorCode code) noexcept;

/// Process exit status the CLI reports for each error code (documented in README).
int exit_code(ErrorCode code) noexcept;

/// The single exception type thrown by the library. `row()` carries a 0-based
/// record index when the failure is attributable to one input row.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace cfkm

#include "cfkm/error.hpp"

namespace cfkm {

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> row)
    : std::runtime_error(message), code_(code), row_(row) {}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::negative_duration: return "negative_duration";
    case ErrorCode::non_binary_delta: return "non_binary_delta";
    case ErrorCode::ragged_covariates: return "ragged_covariates";
    case ErrorCode::empty_sample: return "empty_sample";
    case ErrorCode::non_finite_value: return "non_finite_value";
    case ErrorCode::invalid_grid: return "invalid_grid";
    case ErrorCode::grid_mismatch: return "grid_mismatch";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_bandwidth: return "invalid_bandwidth";
    case ErrorCode::empty_neighborhood: return "empty_neighborhood";
    case ErrorCode::hazard_divergence: return "hazard_divergence";
    case ErrorCode::guard_violation: return "guard_violation";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::quadrature_nonconvergence: return "quadrature_nonconvergence";
    case ErrorCode::estimator_failure: return "estimator_failure";
    case ErrorCode::csv_schema: return "csv_schema";
    case ErrorCode::csv_parse: return "csv_parse";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return 3;
    case ErrorCode::csv_schema: return 4;
    case ErrorCode::csv_parse: return 5;
    case ErrorCode::negative_duration: return 10;
    case ErrorCode::non_binary_delta: return 11;
    case ErrorCode::ragged_covariates: return 12;
    case ErrorCode::empty_sample: return 13;
    case ErrorCode::non_finite_value: return 14;
    case ErrorCode::dimension_mismatch: return 15;
    case ErrorCode::invalid_grid: return 20;
    case ErrorCode::grid_mismatch: return 21;
    case ErrorCode::invalid_bandwidth: return 22;
    case ErrorCode::invalid_argument: return 23;
    case ErrorCode::config: return 24;
    case ErrorCode::empty_neighborhood: return 30;
    case ErrorCode::hazard_divergence: return 31;
    case ErrorCode::guard_violation: return 32;
    case ErrorCode::quadrature_nonconvergence: return 33;
    case ErrorCode::estimator_failure: return 34;
  }
  return 1;
}

}  // namespace cfkm

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cfkm/core_data.hpp"
#include "cfkm/error.hpp"
#include "cfkm/simulation.hpp"

namespace cfkm {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Header "y,delta,x1,...,xd". Row numbers in errors are 1-based data rows
/// (the header is row 0).
CensoredSample parse_sample_csv(std::string_view text);
CensoredSample load_sample_csv(const std::filesystem::path& path);

/// Header "x1,...,xd".
CovariateRows parse_covariate_csv(std::string_view text);
CounterfactualCovariates load_counterfactual_csv(const std::filesystem::path& path, const CensoredSample& sample,
                                                 bool allow_unequal_count = false);

/// Writes records in their original input order with shortest round-trip numbers.
void write_sample_csv(std::ostream& out, const CensoredSample& sample);
void write_covariate_csv(std::ostream& out, const CovariateRows& rows);

/// "start:stop:step".
Grid parse_grid_spec(std::string_view spec);
/// One time per line; blank lines, '#' comments and a leading "t" header are skipped.
Grid load_grid_file(const std::filesystem::path& path);

/// Plain-text "key = value" lines; '#' starts a comment. Keys: sizes,
/// replications, base_seed, bandwidth (auto or a number), bandwidth_constant,
/// bandwidth_exponent, kernel, grid, estimators, hazard, strict, threads, output.
StudyConfig parse_study_config(std::string_view text);
StudyConfig load_study_config(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double; "nan", "inf", "-inf".
std::string format_double(double value);

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::string kernel;
  std::string bandwidth;
  std::string grid;
  std::string hazard;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::string tool_version{kToolVersion};
  std::string timestamp;
  /// Further settings that shape the output, in a fixed order.
  std::vector<std::pair<std::string, std::string>> extra;
};

/// --timestamp when given, else SOURCE_DATE_EPOCH, else the current UTC time,
/// formatted as ISO 8601.
std::string resolve_timestamp(const std::optional<std::string>& explicit_value);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  /// Free-form notes (warning counts); rendered as manifest-adjacent metadata.
  std::vector<std::pair<std::string, std::string>> notes;
};

enum class OutputFormat { csv, json };
OutputFormat parse_output_format(std::string_view name);

/// CSV: manifest and notes as leading "# key: value" lines, then header and rows.
std::string render_csv(const Table& table, const RunManifest& manifest);
/// JSON: {"manifest": {...}, "notes": {...}, "columns": [...], "rows": [{column: value}]};
/// NaN and infinities become null.
std::string render_json(const Table& table, const RunManifest& manifest);
std::string render(const Table& table, const RunManifest& manifest, OutputFormat format);

/// Machine-readable error record, one JSON object on one line.
std::string error_record(const Error& error);

/// Writes to the file, or to `fallback` when the path is empty.
void write_output(const std::string& text, const std::string& path, std::ostream& fallback);

}  // namespace cfkm

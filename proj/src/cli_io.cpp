#include "cfkm/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace cfkm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Trimmed non-empty lines; a leading UTF-8 BOM is dropped.
std::vector<std::string_view> lines_of(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    const auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) out.push_back(line);
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view cell) {
  if (cell.starts_with('+')) cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return value;
}

double parse_cell(std::string_view cell, std::size_t row, std::string_view column) {
  if (auto v = parse_number(cell)) return *v;
  throw Error(ErrorCode::csv_parse,
              "row " + std::to_string(row) + ", column '" + std::string(column) + "': '" + std::string(cell) +
                  "' is not a number",
              row);
}

// Checks that `names[first..]` read x1, x2, ... and returns their count.
std::size_t covariate_columns(const std::vector<std::string_view>& names, std::size_t first) {
  if (names.size() <= first) throw Error(ErrorCode::csv_schema, "missing column 'x1'");
  for (std::size_t k = first; k < names.size(); ++k) {
    const std::string expected = "x" + std::to_string(k - first + 1);
    if (names[k] != expected)
      throw Error(ErrorCode::csv_schema,
                  "missing column '" + expected + "' (found '" + std::string(names[k]) + "')");
  }
  return names.size() - first;
}

std::string rethrow_message(const Error& err, std::size_t data_row) {
  return "row " + std::to_string(data_row) + ": " + err.what();
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CensoredSample parse_sample_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::csv_schema, "sample file is empty");
  const auto header = split(lines.front(), ',');
  if (header.empty() || header[0] != "y") throw Error(ErrorCode::csv_schema, "missing column 'y'");
  if (header.size() < 2 || header[1] != "delta") throw Error(ErrorCode::csv_schema, "missing column 'delta'");
  const std::size_t d = covariate_columns(header, 2);

  std::vector<Observation> obs;
  obs.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split(lines[r], ',');
    if (cells.size() != header.size())
      throw Error(ErrorCode::ragged_covariates,
                  "row " + std::to_string(r) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()),
                  r);
    Observation o;
    o.y = parse_cell(cells[0], r, "y");
    const double delta = parse_cell(cells[1], r, "delta");
    if (delta != 0.0 && delta != 1.0)
      throw Error(ErrorCode::non_binary_delta,
                  "row " + std::to_string(r) + ": delta must be 0 or 1, got '" + std::string(cells[1]) + "'", r);
    o.delta = delta == 1.0 ? 1 : 0;
    o.x.resize(d);
    for (std::size_t k = 0; k < d; ++k) o.x[k] = parse_cell(cells[2 + k], r, header[2 + k]);
    obs.push_back(std::move(o));
  }
  if (obs.empty()) throw Error(ErrorCode::empty_sample, "sample file has a header but no rows");
  try {
    return validate_sample(std::move(obs));
  } catch (const Error& err) {
    if (!err.row()) throw;
    const std::size_t row = *err.row() + 1;
    throw Error(err.code(), rethrow_message(err, row), row);
  }
}

CensoredSample load_sample_csv(const std::filesystem::path& path) { return parse_sample_csv(read_text_file(path)); }

CovariateRows parse_covariate_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::csv_schema, "counterfactual file is empty");
  const auto header = split(lines.front(), ',');
  const std::size_t d = covariate_columns(header, 0);
  std::vector<double> flat;
  flat.reserve((lines.size() - 1) * d);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split(lines[r], ',');
    if (cells.size() != d)
      throw Error(ErrorCode::ragged_covariates,
                  "row " + std::to_string(r) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(d),
                  r);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = parse_cell(cells[k], r, header[k]);
      if (!std::isfinite(v))
        throw Error(ErrorCode::non_finite_value, "row " + std::to_string(r) + ": non-finite covariate", r);
      flat.push_back(v);
    }
  }
  if (flat.empty()) throw Error(ErrorCode::empty_sample, "counterfactual file has a header but no rows");
  return CovariateRows(d, std::move(flat));
}

CounterfactualCovariates load_counterfactual_csv(const std::filesystem::path& path, const CensoredSample& sample,
                                                 bool allow_unequal_count) {
  return CounterfactualCovariates::for_sample(parse_covariate_csv(read_text_file(path)), sample,
                                              allow_unequal_count);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_sample_csv(std::ostream& out, const CensoredSample& sample) {
  out << "y,delta";
  for (std::size_t k = 0; k < sample.dim(); ++k) out << ",x" << (k + 1);
  out << '\n';
  std::vector<std::size_t> position(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) position[sample.original_index(i)] = i;
  for (std::size_t i : position) {
    out << format_double(sample.y(i)) << ',' << sample.delta(i);
    for (double v : sample.x(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_covariate_csv(std::ostream& out, const CovariateRows& rows) {
  for (std::size_t k = 0; k < rows.dim(); ++k) out << (k ? "," : "") << 'x' << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = rows.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
    out << '\n';
  }
}

Grid parse_grid_spec(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw Error(ErrorCode::invalid_grid, "grid spec must read start:stop:step");
  double v[3];
  for (int k = 0; k < 3; ++k) {
    auto parsed = parse_number(parts[static_cast<std::size_t>(k)]);
    if (!parsed) throw Error(ErrorCode::invalid_grid, "grid spec '" + std::string(spec) + "' has a non-number");
    v[k] = *parsed;
  }
  return Grid::uniform(v[0], v[1], v[2]);
}

Grid load_grid_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<double> points;
  for (auto line : lines_of(text)) {
    if (line.starts_with('#')) continue;
    if (points.empty() && line == "t") continue;
    auto v = parse_number(line);
    if (!v) throw Error(ErrorCode::invalid_grid, "grid file entry '" + std::string(line) + "' is not a number");
    points.push_back(*v);
  }
  return Grid(std::move(points));
}

namespace {

std::vector<std::string_view> list_items(std::string_view value) {
  std::vector<std::string_view> out;
  for (auto part : split(value, ','))
    for (auto item : split(part, ' '))
      if (!item.empty()) out.push_back(item);
  return out;
}

template <class T>
T parse_integer(std::string_view value, std::string_view key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty())
    throw Error(ErrorCode::config, "'" + std::string(key) + "' needs an integer, got '" + std::string(value) + "'");
  return out;
}

double parse_real(std::string_view value, std::string_view key) {
  if (auto v = parse_number(value)) return *v;
  throw Error(ErrorCode::config, "'" + std::string(key) + "' needs a number, got '" + std::string(value) + "'");
}

bool parse_bool(std::string_view value, std::string_view key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::config, "'" + std::string(key) + "' needs true or false");
}

}  // namespace

StudyConfig parse_study_config(std::string_view text) {
  StudyConfig config;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    start = pos + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::config, "config line " + std::to_string(line_no) + " lacks '='");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "sizes") {
        config.sizes.clear();
        for (auto item : list_items(value)) config.sizes.push_back(parse_integer<std::size_t>(item, key));
      } else if (key == "replications" || key == "S") {
        config.replications = parse_integer<std::size_t>(value, key);
      } else if (key == "base_seed" || key == "seed") {
        config.base_seed = parse_integer<std::uint64_t>(value, key);
      } else if (key == "bandwidth") {
        if (value == "auto")
          config.bandwidth.fixed.reset();
        else
          config.bandwidth.fixed = parse_real(value, key);
      } else if (key == "bandwidth_constant") {
        config.bandwidth.constant = parse_real(value, key);
      } else if (key == "bandwidth_exponent") {
        config.bandwidth.exponent = parse_real(value, key);
      } else if (key == "kernel") {
        config.kernel = parse_kernel_profile(value);
      } else if (key == "grid") {
        config.grid = parse_grid_spec(value);
      } else if (key == "estimators") {
        config.estimators.clear();
        for (auto item : list_items(value)) config.estimators.push_back(parse_estimator(item));
      } else if (key == "hazard") {
        config.hazard = parse_hazard_method(value);
      } else if (key == "strict") {
        config.strict = parse_bool(value, key);
      } else if (key == "threads") {
        config.threads = parse_integer<unsigned>(value, key);
      } else if (key == "output") {
        config.output = std::string(value);
      } else {
        throw Error(ErrorCode::config, "unknown key '" + std::string(key) + "'");
      }
    } catch (const Error& err) {
      if (err.code() == ErrorCode::config && std::string_view(err.what()).starts_with("config line")) throw;
      throw Error(ErrorCode::config, "config line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  if (config.sizes.empty()) throw Error(ErrorCode::config, "config lists no sample sizes");
  if (config.estimators.empty()) throw Error(ErrorCode::config, "config lists no estimators");
  if (config.replications == 0) throw Error(ErrorCode::config, "replications must be positive");
  return config;
}

StudyConfig load_study_config(const std::filesystem::path& path) { return parse_study_config(read_text_file(path)); }

std::string resolve_timestamp(const std::optional<std::string>& explicit_value) {
  if (explicit_value) return *explicit_value;
  std::time_t when = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    long long parsed = 0;
    const std::string_view s(epoch);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
    if (ec == std::errc{} && ptr == s.data() + s.size()) when = static_cast<std::time_t>(parsed);
  }
  std::tm tm{};
  gmtime_r(&when, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

OutputFormat parse_output_format(std::string_view name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  throw Error(ErrorCode::invalid_argument, "unknown output format '" + std::string(name) + "'");
}

namespace {

std::vector<std::pair<std::string, std::string>> manifest_fields(const RunManifest& m) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("command", m.command);
  for (const auto& [name, path] : m.inputs) out.emplace_back("input." + name, path);
  out.emplace_back("kernel", m.kernel);
  out.emplace_back("bandwidth", m.bandwidth);
  out.emplace_back("grid", m.grid);
  out.emplace_back("hazard", m.hazard);
  if (m.alpha) out.emplace_back("alpha", format_double(*m.alpha));
  if (m.seed) out.emplace_back("seed", std::to_string(*m.seed));
  for (const auto& kv : m.extra) out.push_back(kv);
  out.emplace_back("tool_version", m.tool_version);
  out.emplace_back("timestamp", m.timestamp);
  return out;
}

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return std::get<std::string>(cell);
}

}  // namespace

std::string render_csv(const Table& table, const RunManifest& manifest) {
  std::ostringstream out;
  for (const auto& [key, value] : manifest_fields(manifest)) out << "# " << key << ": " << value << '\n';
  for (const auto& [key, value] : table.notes) out << "# note." << key << ": " << value << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << cell_text(row[c]);
    out << '\n';
  }
  return out.str();
}

std::string render_json(const Table& table, const RunManifest& manifest) {
  using json = nlohmann::ordered_json;
  json doc;
  json m = json::object();
  for (const auto& [key, value] : manifest_fields(manifest)) m[key] = value;
  doc["manifest"] = std::move(m);
  json notes = json::object();
  for (const auto& [key, value] : table.notes) notes[key] = value;
  doc["notes"] = std::move(notes);
  doc["columns"] = table.columns;
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      const Cell& cell = row[c];
      if (const auto* d = std::get_if<double>(&cell))
        r[table.columns[c]] = std::isfinite(*d) ? json(*d) : json(nullptr);
      else if (const auto* i = std::get_if<std::int64_t>(&cell))
        r[table.columns[c]] = *i;
      else
        r[table.columns[c]] = std::get<std::string>(cell);
    }
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string render(const Table& table, const RunManifest& manifest, OutputFormat format) {
  return format == OutputFormat::csv ? render_csv(table, manifest) : render_json(table, manifest);
}

std::string error_record(const Error& error) {
  nlohmann::ordered_json rec;
  rec["error"] = std::string(to_string(error.code()));
  rec["exit_code"] = exit_code(error.code());
  rec["message"] = error.what();
  if (error.row())
    rec["row"] = *error.row();
  else
    rec["row"] = nullptr;
  return rec.dump();
}

void write_output(const std::string& text, const std::string& path, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write to '" + path + "' failed");
}

}  // namespace cfkm

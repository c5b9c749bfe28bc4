#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kergpk/error.hpp"
#include "kergpk/inference.hpp"
#include "kergpk/matrix.hpp"
#include "kergpk/simgen.hpp"
#include "kergpk/statistics.hpp"

namespace kergpk {

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace detail

/// Numeric table read from a comma- or tab-separated file. A first row that
/// does not parse as numbers is treated as a header and skipped. Blank lines
/// are ignored.
struct CsvTable {
  std::vector<std::vector<double>> rows;
  std::optional<std::vector<std::string>> header;
  std::size_t columns() const { return rows.empty() ? 0 : rows.front().size(); }
};

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  std::optional<char> delim;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (!delim) delim = view.find('\t') != std::string_view::npos ? '\t' : ',';
    auto cells = detail::split(view, *delim);
    std::vector<double> values;
    values.reserve(cells.size());
    std::optional<std::size_t> bad_cell;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_number(cells[c]);
      if (!v) {
        bad_cell = c;
        break;
      }
      if (!std::isfinite(*v)) {
        throw DataError(source + ":" + std::to_string(line_no) + ": non-finite value in column " +
                        std::to_string(c + 1));
      }
      values.push_back(*v);
    }
    if (bad_cell) {
      if (first_content) {
        std::vector<std::string> names;
        for (auto c : cells) names.emplace_back(detail::trim(c));
        table.header = std::move(names);
        first_content = false;
        continue;
      }
      throw DataError(source + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                      std::string(detail::trim(cells[*bad_cell])) + "' in column " +
                      std::to_string(*bad_cell + 1));
    }
    first_content = false;
    if (!table.rows.empty() && values.size() != table.rows.front().size()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": ragged row with " +
                      std::to_string(values.size()) + " columns, expected " +
                      std::to_string(table.rows.front().size()));
    }
    if (table.header && table.rows.empty() && values.size() != table.header->size()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": row has " + std::to_string(values.size()) +
                      " columns but the header has " + std::to_string(table.header->size()));
    }
    table.rows.push_back(std::move(values));
  }
  if (table.rows.empty()) throw DataError(source + ": no numeric rows");
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return parse_csv(in, path);
}

inline ObservationSet to_observations(const CsvTable& t, const std::string& source) {
  std::vector<double> values;
  values.reserve(t.rows.size() * t.columns());
  for (const auto& r : t.rows) values.insert(values.end(), r.begin(), r.end());
  try {
    return ObservationSet(t.rows.size(), t.columns(), std::move(values));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

/// Reads the two samples (rows = observations) and checks their dimensions agree.
inline std::pair<ObservationSet, ObservationSet> ingest_samples(const std::string& path_x,
                                                                const std::string& path_y) {
  ObservationSet x = to_observations(read_csv(path_x), path_x);
  ObservationSet y = to_observations(read_csv(path_y), path_y);
  if (x.dim() != y.dim()) {
    throw DataError("dimension mismatch: " + path_x + " has " + std::to_string(x.dim()) + " columns, " + path_y +
                    " has " + std::to_string(y.dim()));
  }
  return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

using nlohmann::json;

namespace detail {
// JSON has no NaN/Inf; they serialize as null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace detail

inline json to_json(const ReportMetadata& m) {
  json j;
  j["kernel_kind"] = m.kernel_kind;
  j["bandwidth_rule"] = m.bandwidth_rule;
  j["bandwidth"] = m.bandwidth ? detail::number_or_null(*m.bandwidth) : json(nullptr);
  j["seed"] = m.seed;
  j["replicates"] = m.replicates ? json(*m.replicates) : json(nullptr);
  j["scheme"] = m.scheme ? json(*m.scheme) : json(nullptr);
  j["m"] = m.m;
  j["n"] = m.n;
  j["c1_violated"] = m.c1_violated;
  j["c2_violated"] = m.c2_violated;
  return j;
}

inline json to_json(const TestReport& r) {
  json j;
  j["method"] = to_string(r.method);
  j["p_value"] = detail::number_or_null(r.p_value);
  j["level"] = r.level;
  j["reject"] = r.reject;
  json stats = json::object();
  for (const auto& [k, v] : r.statistics) stats[k] = detail::number_or_null(v);
  j["statistics"] = stats;
  json comp = json::object();
  for (const auto& [k, v] : r.component_p) comp[k] = detail::number_or_null(v);
  j["component_p"] = comp;
  j["metadata"] = to_json(r.metadata);
  j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
  j["corner_case"] = r.corner_case.empty() ? json(nullptr) : json(r.corner_case);
  return j;
}

inline json to_json(const DegeneracyReport& d) {
  return {{"c1_violated", d.c1_violated},
          {"c2_violated", d.c2_violated},
          {"c2_given_order", d.c2_given_order},
          {"c2_pivot", d.c2_pivot ? json(*d.c2_pivot) : json(nullptr)},
          {"condition1_ratio", detail::number_or_null(d.condition1_ratio)},
          {"condition2_ratio", detail::number_or_null(d.condition2_ratio)}};
}

inline json to_json(const PowerEstimate& e) {
  return {{"family", to_string(e.scenario.family)},
          {"d", e.scenario.d},
          {"m", e.scenario.m},
          {"n", e.scenario.n},
          {"a", e.scenario.a},
          {"delta", e.scenario.delta()},
          {"sigma2", e.scenario.sigma2},
          {"cov", to_string(e.scenario.cov)},
          {"method", e.method},
          {"trials", e.trials},
          {"invalid", e.invalid},
          {"level", e.level},
          {"rejections", e.rejections},
          {"power", detail::number_or_null(e.power)},
          {"mc_stderr", detail::number_or_null(e.mc_stderr)}};
}

/// Fixed, header-stable TSV columns for test reports.
inline const std::vector<std::string>& report_tsv_columns() {
  static const std::vector<std::string> cols = {
      "method", "p_value", "reject",  "level",   "gpk",       "mmd_u", "z_w_1.2",   "z_w_0.8", "z_d",
      "p_W_1.2", "p_W_0.8", "p_D",    "kernel_kind", "bandwidth", "seed", "replicates", "m",     "n", "error"};
  return cols;
}

namespace detail {
inline std::string fmt_number(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
template <typename Map>
inline std::string lookup(const Map& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? "" : fmt_number(it->second);
}
}  // namespace detail

inline std::string reports_to_tsv(const std::vector<TestReport>& reports) {
  std::ostringstream os;
  const auto& cols = report_tsv_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "\t" : "") << cols[c];
  os << '\n';
  for (const auto& r : reports) {
    os << to_string(r.method) << '\t' << detail::fmt_number(r.p_value) << '\t' << (r.reject ? "true" : "false")
       << '\t' << detail::fmt_number(r.level) << '\t' << detail::lookup(r.statistics, "gpk") << '\t'
       << detail::lookup(r.statistics, "mmd_u") << '\t' << detail::lookup(r.statistics, "z_w_1.2") << '\t'
       << detail::lookup(r.statistics, "z_w_0.8") << '\t' << detail::lookup(r.statistics, "z_d") << '\t'
       << detail::lookup(r.component_p, "p_W_1.2") << '\t' << detail::lookup(r.component_p, "p_W_0.8") << '\t'
       << detail::lookup(r.component_p, "p_D") << '\t' << r.metadata.kernel_kind << '\t'
       << (r.metadata.bandwidth ? detail::fmt_number(*r.metadata.bandwidth) : "") << '\t' << r.metadata.seed
       << '\t' << (r.metadata.replicates ? std::to_string(*r.metadata.replicates) : "") << '\t' << r.metadata.m
       << '\t' << r.metadata.n << '\t' << r.error << '\n';
  }
  return os.str();
}

inline const std::vector<std::string>& power_tsv_columns() {
  static const std::vector<std::string> cols = {"family", "d",       "m",     "n",          "a",
                                                "delta",  "sigma2",  "cov",   "method",     "trials",
                                                "invalid", "level",  "rejections", "power", "mc_stderr"};
  return cols;
}

inline std::string power_to_tsv(const std::vector<PowerEstimate>& rows) {
  std::ostringstream os;
  const auto& cols = power_tsv_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "\t" : "") << cols[c];
  os << '\n';
  for (const auto& e : rows) {
    os << to_string(e.scenario.family) << '\t' << e.scenario.d << '\t' << e.scenario.m << '\t' << e.scenario.n
       << '\t' << detail::fmt_number(e.scenario.a) << '\t' << detail::fmt_number(e.scenario.delta()) << '\t'
       << detail::fmt_number(e.scenario.sigma2) << '\t' << to_string(e.scenario.cov) << '\t' << e.method << '\t'
       << e.trials << '\t' << e.invalid << '\t' << detail::fmt_number(e.level) << '\t' << e.rejections << '\t'
       << detail::fmt_number(e.power) << '\t' << detail::fmt_number(e.mc_stderr) << '\n';
  }
  return os.str();
}

}  // namespace kergpk

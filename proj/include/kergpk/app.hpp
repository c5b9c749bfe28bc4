#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kergpk/aggregates.hpp"
#include "kergpk/error.hpp"
#include "kergpk/inference.hpp"
#include "kergpk/io.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/simgen.hpp"
#include "kergpk/statistics.hpp"

namespace kergpk {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,          ///< completed; rejection is reported in the output, not the exit code
  kExitUsage = 1,       ///< bad command line or invalid parameter
  kExitInput = 2,       ///< unreadable, malformed or too-small data
  kExitDegenerate = 3,  ///< GPK or Z statistics undefined (kernel corner case)
  kExitInternal = 4,    ///< numerical failure or unexpected error
};

enum class OutputFormat { json, tsv, pretty };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "json") return OutputFormat::json;
  if (s == "tsv") return OutputFormat::tsv;
  if (s == "pretty") return OutputFormat::pretty;
  throw ParameterError("unknown output format '" + s + "' (expected json, tsv or pretty)");
}

/// "median", "median-literal" or a positive number.
inline BandwidthChoice parse_bandwidth(const std::string& s) {
  if (s == "median") return BandwidthChoice::median();
  if (s == "median-literal" || s == "median_literal") return BandwidthChoice::median_literal();
  auto v = detail::parse_number(s);
  if (!v || !(*v > 0.0)) throw ParameterError("bandwidth must be median, median-literal or a positive number");
  return BandwidthChoice::fixed(*v);
}

inline std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  for (auto part : detail::split(list, ',')) {
    auto name = detail::trim(part);
    if (!name.empty()) out.push_back(parse_method(std::string(name)));
  }
  if (out.empty()) throw ParameterError("method list is empty");
  return out;
}

struct RunConfig {
  std::string subcommand = "test";  ///< test | simulate | diagnose
  std::string x_path;
  std::string y_path;
  std::string precomputed_path;   ///< square kernel CSV; first `split_m` rows are sample X
  std::optional<std::size_t> split_m;
  std::string statistics_path;    ///< JSON with z_w_1.2 / z_w_0.8 / z_d or p_W_1.2 / p_W_0.8 / p_D
  std::vector<Method> methods = {Method::fgpk, Method::fgpk_m};
  BandwidthChoice bandwidth = BandwidthChoice::median();
  std::size_t permutations = 1000;
  bool exhaustive = false;
  std::uint64_t seed = 0;
  double level = 0.05;
  OutputFormat format = OutputFormat::json;
  // simulate
  std::string preset;
  std::optional<ScenarioSpec> scenario;
  std::size_t trials = 1000;

  void validate() const {
    validate_level(level);
    bool perm = false;
    for (Method m : methods) perm = perm || uses_permutations(m);
    if (perm && !exhaustive && permutations < 1) {
      throw ParameterError("permutation methods need --permutations >= 1");
    }
  }
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string output;   ///< serialized report, written to stdout
  std::string message;  ///< diagnostic for stderr
  std::vector<TestReport> reports;
};

namespace detail {

inline const char* kToolName = "kergpk";
inline const char* kToolVersion = "1.0.0";

inline std::string pretty_reports(const std::vector<TestReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "method" << std::setw(14) << "p-value" << std::setw(8) << "reject"
     << "details\n";
  for (const auto& r : reports) {
    os << std::setw(14) << to_string(r.method);
    if (!r.ok()) {
      os << std::setw(14) << "-" << std::setw(8) << "-" << "error: " << r.error << '\n';
      continue;
    }
    std::ostringstream p;
    p << std::setprecision(4) << r.p_value;
    os << std::setw(14) << p.str() << std::setw(8) << (r.reject ? "yes" : "no");
    bool first = true;
    for (const auto& [k, v] : r.statistics) {
      os << (first ? "" : ", ") << k << "=" << std::setprecision(5) << v;
      first = false;
    }
    for (const auto& [k, v] : r.component_p) os << ", " << k << "=" << std::setprecision(4) << v;
    os << '\n';
  }
  if (!reports.empty()) {
    const auto& m = reports.front().metadata;
    os << "\nm=" << m.m << " n=" << m.n << " kernel=" << m.kernel_kind;
    if (m.bandwidth) os << " bandwidth=" << std::setprecision(6) << *m.bandwidth << " (" << m.bandwidth_rule << ")";
    os << " seed=" << m.seed << '\n';
  }
  return os.str();
}

struct LoadedInstance {
  KernelMatrix kernel;
  SampleLayout layout;
  std::string bandwidth_rule;
};

inline LoadedInstance load_instance(const RunConfig& cfg) {
  if (!cfg.precomputed_path.empty()) {
    CsvTable t = read_csv(cfg.precomputed_path);
    KernelMatrix k = load_precomputed_kernel(t.rows);
    if (!cfg.split_m) throw ParameterError("--precomputed requires --m (number of leading rows in sample X)");
    const std::size_t total = k.size();
    if (*cfg.split_m >= total) throw SizeError("--m must be smaller than the kernel size");
    SampleLayout layout(*cfg.split_m, total - *cfg.split_m);
    return {std::move(k), std::move(layout), ""};
  }
  if (cfg.x_path.empty() || cfg.y_path.empty()) {
    throw ParameterError("provide --x and --y sample files, or --precomputed with --m");
  }
  auto [x, y] = ingest_samples(cfg.x_path, cfg.y_path);
  SampleLayout layout(x.rows(), y.rows());
  return {build_gaussian_kernel(pool(x, y), cfg.bandwidth), layout, cfg.bandwidth.name()};
}

inline double require_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw DataError(std::string("statistics file lacks numeric field '") + key + "'");
  }
  return j[key].get<double>();
}

// Reports for the analytic methods from serialized statistics (no raw data).
inline std::vector<TestReport> reports_from_statistics(const RunConfig& cfg) {
  std::ifstream in(cfg.statistics_path);
  if (!in) throw DataError(cfg.statistics_path + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(cfg.statistics_path + ": " + e.what());
  }
  ComponentPValues c;
  std::map<std::string, double> stats;
  if (j.contains("z_w_1.2")) {
    stats["z_w_1.2"] = require_number(j, "z_w_1.2");
    stats["z_w_0.8"] = require_number(j, "z_w_0.8");
    stats["z_d"] = require_number(j, "z_d");
    c = normal_tail_pvalues(stats["z_w_1.2"], stats["z_w_0.8"], stats["z_d"]);
  } else {
    c = {require_number(j, "p_W_1.2"), require_number(j, "p_W_0.8"), require_number(j, "p_D")};
  }
  std::vector<TestReport> out;
  for (Method m : cfg.methods) {
    TestReport r;
    switch (m) {
      case Method::fgpk: r = fgpk_test(c, cfg.level); break;
      case Method::fgpk_m: r = fgpk_m_test(c.p_w12, c.p_w08, cfg.level); break;
      case Method::fgpk_simes: r = fgpk_simes_test(c, cfg.level); break;
      case Method::fgpk_m_simes: r = fgpk_m_simes_test(c.p_w12, c.p_w08, cfg.level); break;
      default:
        throw ParameterError(std::string("method ") + to_string(m) + " needs raw data, not a statistics file");
    }
    r.statistics = stats;
    if (m == Method::fgpk_m || m == Method::fgpk_m_simes) r.statistics.erase("z_d");
    r.metadata.seed = cfg.seed;
    out.push_back(std::move(r));
  }
  return out;
}

inline json breakdown_json(const Analysis& a, const DifferenceBreakdown& b) {
  return {{"alpha", a.pair.alpha},
          {"beta", a.pair.beta},
          {"gamma", a.pair.gamma},
          {"alpha_minus_gamma", b.alpha_minus_gamma},
          {"beta_minus_gamma", b.beta_minus_gamma},
          {"alpha_minus_gamma_std", number_or_null(b.alpha_minus_gamma_std)},
          {"beta_minus_gamma_std", number_or_null(b.beta_minus_gamma_std)},
          {"mmd_u", a.bundle.mmd_u},
          {"mmd_b", number_or_null(a.bundle.mmd_b)},
          {"gpk", a.bundle.gpk},
          {"w", a.bundle.w},
          {"d", a.bundle.d},
          {"z_w", a.bundle.z_w},
          {"z_d", a.bundle.z_d},
          {"z_w_1.2", a.bundle.z_w_r.at(kFastWeightHigh)},
          {"z_w_0.8", a.bundle.z_w_r.at(kFastWeightLow)}};
}

template <typename F>
RunOutcome guarded(F&& body) {
  try {
    return body();
  } catch (const DegenerateError& e) {
    return {kExitDegenerate, "", e.what(), {}};
  } catch (const DataError& e) {
    return {kExitInput, "", e.what(), {}};
  } catch (const ParameterError& e) {
    return {kExitUsage, "", e.what(), {}};
  } catch (const SizeError& e) {
    return {kExitInput, "", e.what(), {}};
  } catch (const EnumerationCapError& e) {
    return {kExitInput, "", e.what(), {}};
  } catch (const std::exception& e) {
    return {kExitInternal, "", e.what(), {}};
  }
}

}  // namespace detail

/// `test` subcommand: one report per requested method.
inline RunOutcome run_test(const RunConfig& cfg) {
  return detail::guarded([&]() -> RunOutcome {
    cfg.validate();
    RunOutcome out;
    json doc;
    doc["tool"] = detail::kToolName;
    doc["version"] = detail::kToolVersion;
    doc["command"] = "test";
    if (!cfg.statistics_path.empty()) {
      out.reports = detail::reports_from_statistics(cfg);
    } else {
      auto inst = detail::load_instance(cfg);
      ResamplingPlan plan;
      plan.replicates = cfg.permutations;
      plan.seed = cfg.seed;
      plan.scheme = cfg.exhaustive ? ResamplingPlan::Scheme::exhaustive : ResamplingPlan::Scheme::random_permutation;
      out.reports = run_tests(inst.kernel, inst.layout, cfg.methods, plan, cfg.level, inst.bandwidth_rule);
      try {
        Analysis a = analyze(inst.kernel, inst.layout);
        doc["breakdown"] = detail::breakdown_json(a, difference_breakdown(a.pair, a.moments, a.aggregates));
      } catch (const DegenerateError&) {
        doc["breakdown"] = nullptr;
      }
    }
    json reports = json::array();
    for (const auto& r : out.reports) {
      reports.push_back(to_json(r));
      if (!r.ok()) {
        out.exit_code = kExitDegenerate;
        out.message = std::string(to_string(r.method)) + ": " + r.error;
      }
    }
    doc["reports"] = reports;
    switch (cfg.format) {
      case OutputFormat::json: out.output = doc.dump(2) + "\n"; break;
      case OutputFormat::tsv: out.output = reports_to_tsv(out.reports); break;
      case OutputFormat::pretty: out.output = detail::pretty_reports(out.reports); break;
    }
    return out;
  });
}

/// `simulate` subcommand: power/size rows for a preset or a single scenario.
inline RunOutcome run_simulation(const RunConfig& cfg) {
  return detail::guarded([&]() -> RunOutcome {
    cfg.validate();
    std::vector<ScenarioSpec> grid;
    if (!cfg.preset.empty()) grid = scenario_table(cfg.preset);
    if (cfg.scenario) grid.push_back(*cfg.scenario);
    if (grid.empty()) throw ParameterError("simulate needs --preset or an explicit scenario (--family ...)");
    PowerOptions opt;
    opt.methods = cfg.methods;
    opt.trials = cfg.trials;
    opt.level = cfg.level;
    opt.seed = cfg.seed;
    opt.replicates = cfg.permutations;
    opt.bandwidth = cfg.bandwidth;
    std::vector<PowerEstimate> rows;
    for (const auto& spec : grid) {
      auto est = estimate_power(spec, opt);
      rows.insert(rows.end(), est.begin(), est.end());
    }
    RunOutcome out;
    if (cfg.format == OutputFormat::json) {
      json doc;
      doc["tool"] = detail::kToolName;
      doc["version"] = detail::kToolVersion;
      doc["command"] = "simulate";
      doc["preset"] = cfg.preset.empty() ? json(nullptr) : json(cfg.preset);
      doc["seed"] = cfg.seed;
      doc["replicates"] = cfg.permutations;
      doc["bandwidth_rule"] = cfg.bandwidth.name();
      json arr = json::array();
      for (const auto& r : rows) arr.push_back(to_json(r));
      doc["rows"] = arr;
      out.output = doc.dump(2) + "\n";
    } else {
      out.output = power_to_tsv(rows);
    }
    return out;
  });
}

/// `diagnose` subcommand: aggregates, moments, corner-case checks and statistics.
inline RunOutcome run_diagnose(const RunConfig& cfg) {
  return detail::guarded([&]() -> RunOutcome {
    auto inst = detail::load_instance(cfg);
    const KernelAggregates agg = compute_aggregates(inst.kernel);
    const PermutationMoments pm = permutation_moments(agg, inst.layout);
    const DegeneracyReport deg = check_degeneracy(inst.kernel);
    json doc;
    doc["tool"] = detail::kToolName;
    doc["version"] = detail::kToolVersion;
    doc["command"] = "diagnose";
    doc["m"] = inst.layout.m();
    doc["n"] = inst.layout.n();
    doc["kernel_kind"] = to_string(inst.kernel.kind());
    doc["bandwidth"] = inst.kernel.bandwidth() ? json(*inst.kernel.bandwidth()) : json(nullptr);
    doc["bandwidth_rule"] = inst.bandwidth_rule;
    doc["aggregates"] = {{"S", agg.s}, {"kbar", agg.kbar}, {"A", agg.a}, {"B", agg.b}, {"C", agg.c}};
    doc["moments"] = {{"e_alpha", pm.e_alpha},
                      {"e_beta", pm.e_beta},
                      {"cov_ab", {{pm.cov_ab[0][0], pm.cov_ab[0][1]}, {pm.cov_ab[1][0], pm.cov_ab[1][1]}}},
                      {"e_w", pm.e_w},
                      {"var_w", pm.var_w},
                      {"e_d", pm.e_d},
                      {"var_d", pm.var_d},
                      {"degenerate", pm.degenerate}};
    doc["degeneracy"] = to_json(deg);
    RunOutcome out;
    try {
      Analysis a = analyze(inst.kernel, inst.layout);
      doc["statistics"] = detail::breakdown_json(a, difference_breakdown(a.pair, a.moments, a.aggregates));
    } catch (const DegenerateError& e) {
      doc["statistics"] = nullptr;
      doc["error"] = e.what();
      doc["corner_case"] = e.corner_case();
      out.exit_code = kExitDegenerate;
      out.message = e.what();
    }
    out.output = doc.dump(2) + "\n";
    return out;
  });
}

}  // namespace kergpk

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kergpk/app.hpp"

namespace {

kergpk::Family parse_family(const std::string& s) {
  if (s == "gaussian") return kergpk::Family::gaussian;
  if (s == "t20" || s == "student_t20") return kergpk::Family::student_t20;
  if (s == "chisq3") return kergpk::Family::chisq3;
  throw kergpk::ParameterError("unknown family '" + s + "' (expected gaussian, t20 or chisq3)");
}

int emit(const kergpk::RunOutcome& out) {
  std::cout << out.output << std::flush;
  if (!out.message.empty()) std::cerr << "kergpk: " << out.message << '\n';
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized kernel two-sample tests (GPK, fGPK, fGPK_M)"};
  app.require_subcommand(1);

  std::string x_path, y_path, precomputed, statistics, methods = "fgpk,fgpk_m", bandwidth = "median";
  std::string format = "json", preset, family, cov = "ar04";
  std::size_t permutations = 1000, trials = 1000, split_m = 0, dim = 50, m = 50, n = 50;
  std::uint64_t seed = 0;
  double level = 0.05, shift = 0.0, delta = -1.0, sigma2 = 1.0;
  bool exhaustive = false;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--x", x_path, "CSV file with sample X (rows = observations)");
    sub->add_option("--y", y_path, "CSV file with sample Y");
    sub->add_option("--precomputed", precomputed, "square kernel matrix CSV instead of --x/--y");
    sub->add_option("--m", split_m, "with --precomputed: number of leading rows that form sample X");
    sub->add_option("--bandwidth", bandwidth, "median | median-literal | positive number");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--method", methods,
                    "comma list of gpk_perm, mmd_perm, fgpk, fgpk_m, fgpk_simes, fgpk_m_simes");
    sub->add_option("--permutations", permutations, "permutation replicates B");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--level", level, "significance level");
    sub->add_option("--format", format, "json | tsv | pretty");
  };

  CLI::App* test = app.add_subcommand("test", "run two-sample tests on data files");
  add_data(test);
  add_common(test);
  test->add_option("--statistics", statistics, "JSON with z_w_1.2, z_w_0.8, z_d (or p_W_1.2, p_W_0.8, p_D)");
  test->add_flag("--exhaustive", exhaustive, "enumerate all label assignments instead of random permutations");

  CLI::App* simulate = app.add_subcommand("simulate", "estimate power / size on synthetic data");
  add_common(simulate);
  simulate->add_option("--bandwidth", bandwidth, "median | median-literal | positive number");
  simulate->add_option("--preset", preset, "table1, table4_loc, ..., null_sizes");
  simulate->add_option("--trials", trials, "simulation trials per scenario");
  simulate->add_option("--family", family, "explicit scenario: gaussian | t20 | chisq3");
  simulate->add_option("--dim", dim, "explicit scenario: dimension d");
  simulate->add_option("--size-x", m, "explicit scenario: m");
  simulate->add_option("--size-y", n, "explicit scenario: n");
  simulate->add_option("--shift", shift, "explicit scenario: per-coordinate mean shift a");
  simulate->add_option("--delta", delta, "explicit scenario: ||a 1_d||, overrides --shift");
  simulate->add_option("--sigma2", sigma2, "explicit scenario: scale multiplier");
  simulate->add_option("--cov", cov, "explicit scenario: ar04 | identity");

  CLI::App* diagnose = app.add_subcommand("diagnose", "print aggregates, moments and corner-case checks");
  add_data(diagnose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kergpk::kExitOk : kergpk::kExitUsage;
  }

  kergpk::RunConfig cfg;
  try {
    cfg.x_path = x_path;
    cfg.y_path = y_path;
    cfg.precomputed_path = precomputed;
    if (split_m > 0) cfg.split_m = split_m;
    cfg.statistics_path = statistics;
    cfg.methods = kergpk::parse_methods(methods);
    cfg.bandwidth = kergpk::parse_bandwidth(bandwidth);
    cfg.permutations = permutations;
    cfg.exhaustive = exhaustive;
    cfg.seed = seed;
    cfg.level = level;
    cfg.format = kergpk::parse_format(format);
    cfg.preset = preset;
    cfg.trials = trials;
    if (!family.empty()) {
      kergpk::ScenarioSpec spec;
      spec.family = parse_family(family);
      spec.d = dim;
      spec.m = m;
      spec.n = n;
      spec.a = delta >= 0 ? delta / std::sqrt(double(dim)) : shift;
      spec.sigma2 = sigma2;
      if (cov != "ar04" && cov != "identity") throw kergpk::ParameterError("--cov must be ar04 or identity");
      spec.cov = cov == "ar04" ? kergpk::CovarianceKind::ar04 : kergpk::CovarianceKind::identity;
      cfg.scenario = spec;
    }
  } catch (const kergpk::ParameterError& e) {
    std::cerr << "kergpk: " << e.what() << '\n';
    return kergpk::kExitUsage;
  } catch (const kergpk::Error& e) {
    std::cerr << "kergpk: " << e.what() << '\n';
    return kergpk::kExitInput;
  }

  if (test->parsed()) return emit(kergpk::run_test(cfg));
  if (simulate->parsed()) return emit(kergpk::run_simulation(cfg));
  return emit(kergpk::run_diagnose(cfg));
}

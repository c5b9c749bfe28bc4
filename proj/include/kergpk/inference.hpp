#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kergpk/aggregates.hpp"
#include "kergpk/error.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/parallel.hpp"
#include "kergpk/statistics.hpp"
#include "kergpk/sums.hpp"

namespace kergpk {

// ---------------------------------------------------------------------------
// Normal tail
// ---------------------------------------------------------------------------

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// 1 - Phi(x) without cancellation in the upper tail.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Methods and reports
// ---------------------------------------------------------------------------

enum class Method { gpk_perm, mmd_perm, fgpk, fgpk_m, fgpk_simes, fgpk_m_simes };

inline constexpr std::array<Method, 6> kAllMethods = {Method::gpk_perm,   Method::mmd_perm,
                                                      Method::fgpk,       Method::fgpk_m,
                                                      Method::fgpk_simes, Method::fgpk_m_simes};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::gpk_perm: return "gpk_perm";
    case Method::mmd_perm: return "mmd_perm";
    case Method::fgpk: return "fgpk";
    case Method::fgpk_m: return "fgpk_m";
    case Method::fgpk_simes: return "fgpk_simes";
    case Method::fgpk_m_simes: return "fgpk_m_simes";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : kAllMethods)
    if (s == to_string(m)) return m;
  throw ParameterError("unknown method '" + s +
                       "' (expected gpk_perm, mmd_perm, fgpk, fgpk_m, fgpk_simes or fgpk_m_simes)");
}

inline bool uses_permutations(Method m) { return m == Method::gpk_perm || m == Method::mmd_perm; }

struct ResamplingPlan {
  enum class Scheme { random_permutation, exhaustive };
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::random_permutation;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;

  void validate() const {
    if (scheme == Scheme::random_permutation && replicates < 1) {
      throw ParameterError("random permutation needs at least one replicate");
    }
  }
};

inline const char* to_string(ResamplingPlan::Scheme s) {
  return s == ResamplingPlan::Scheme::exhaustive ? "exhaustive" : "random_permutation";
}

/// Reproducibility metadata embedded in every report.
struct ReportMetadata {
  std::string kernel_kind;
  std::string bandwidth_rule;
  std::optional<double> bandwidth;
  std::uint64_t seed = 0;
  std::optional<std::size_t> replicates;  ///< set for permutation methods
  std::optional<std::string> scheme;
  std::size_t m = 0;
  std::size_t n = 0;
  bool c1_violated = false;
  bool c2_violated = false;
};

struct TestReport {
  Method method = Method::fgpk;
  std::map<std::string, double> statistics;
  double p_value = 1.0;
  std::map<std::string, double> component_p;  ///< p_W_1.2, p_W_0.8, p_D where applicable
  double level = 0.05;
  bool reject = false;
  ReportMetadata metadata;
  std::string error;        ///< empty on success
  std::string corner_case;  ///< "C1" / "C2" when the error is a kernel corner case

  bool ok() const noexcept { return error.empty(); }
};

inline void validate_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ParameterError("significance level must lie in (0, 1), got " + std::to_string(level));
  }
}

// ---------------------------------------------------------------------------
// Analytic fast tests
// ---------------------------------------------------------------------------

struct ComponentPValues {
  double p_w12 = 1.0;  ///< 1 - Phi(Z_{W,1.2})
  double p_w08 = 1.0;  ///< 1 - Phi(Z_{W,0.8})
  double p_d = 1.0;    ///< 2 Phi(-|Z_D|)
};

inline ComponentPValues normal_tail_pvalues(double z_w12, double z_w08, double z_d) {
  return {normal_upper_tail(z_w12), normal_upper_tail(z_w08), 2.0 * normal_cdf(-std::abs(z_d))};
}

/// Requires Z_{W,1.2} and Z_{W,0.8} in the bundle.
inline ComponentPValues normal_tail_pvalues(const StatisticBundle& b) {
  auto hi = b.z_w_r.find(kFastWeightHigh);
  auto lo = b.z_w_r.find(kFastWeightLow);
  if (hi == b.z_w_r.end() || lo == b.z_w_r.end()) {
    throw ParameterError("statistic bundle lacks Z_{W,1.2} or Z_{W,0.8}");
  }
  return normal_tail_pvalues(hi->second, lo->second, b.z_d);
}

namespace detail {

inline void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(std::string("component p-value ") + name + " must lie in [0, 1], got " +
                         std::to_string(p));
  }
}

inline TestReport combined_report(Method method, double p, double level,
                                  std::map<std::string, double> components) {
  validate_level(level);
  TestReport r;
  r.method = method;
  r.p_value = std::min(1.0, p);
  r.level = level;
  r.reject = r.p_value < level;
  r.component_p = std::move(components);
  return r;
}

inline std::map<std::string, double> component_map(const ComponentPValues& c) {
  return {{"p_W_1.2", c.p_w12}, {"p_W_0.8", c.p_w08}, {"p_D", c.p_d}};
}

}  // namespace detail

/// Bonferroni over three components: min(1, 3 min p).
inline TestReport fgpk_test(const ComponentPValues& c, double level) {
  detail::check_probability(c.p_w12, "p_W_1.2");
  detail::check_probability(c.p_w08, "p_W_0.8");
  detail::check_probability(c.p_d, "p_D");
  return detail::combined_report(Method::fgpk, 3.0 * std::min({c.p_w12, c.p_w08, c.p_d}), level,
                                 detail::component_map(c));
}

/// Bonferroni over the two weighted-W components: min(1, 2 min p).
inline TestReport fgpk_m_test(double p_w12, double p_w08, double level) {
  detail::check_probability(p_w12, "p_W_1.2");
  detail::check_probability(p_w08, "p_W_0.8");
  return detail::combined_report(Method::fgpk_m, 2.0 * std::min(p_w12, p_w08), level,
                                 {{"p_W_1.2", p_w12}, {"p_W_0.8", p_w08}});
}

/// Simes over three components: min(1, 3 p(1), 1.5 p(2), p(3)).
inline TestReport fgpk_simes_test(const ComponentPValues& c, double level) {
  detail::check_probability(c.p_w12, "p_W_1.2");
  detail::check_probability(c.p_w08, "p_W_0.8");
  detail::check_probability(c.p_d, "p_D");
  std::array<double, 3> p = {c.p_w12, c.p_w08, c.p_d};
  std::sort(p.begin(), p.end());
  return detail::combined_report(Method::fgpk_simes, std::min({3.0 * p[0], 1.5 * p[1], p[2]}), level,
                                 detail::component_map(c));
}

/// Simes over two components: min(1, 2 p'(1), p'(2)).
inline TestReport fgpk_m_simes_test(double p_w12, double p_w08, double level) {
  detail::check_probability(p_w12, "p_W_1.2");
  detail::check_probability(p_w08, "p_W_0.8");
  const double lo = std::min(p_w12, p_w08), hi = std::max(p_w12, p_w08);
  return detail::combined_report(Method::fgpk_m_simes, std::min(2.0 * lo, hi), level,
                                 {{"p_W_1.2", p_w12}, {"p_W_0.8", p_w08}});
}

// ---------------------------------------------------------------------------
// Permutation engine
// ---------------------------------------------------------------------------

enum class StatisticKind { gpk, mmd_u, z_w };

inline double statistic_value(StatisticKind kind, const PairSums& p, const PermutationMoments& pm) {
  switch (kind) {
    case StatisticKind::gpk: return gpk_statistic(p, pm);
    case StatisticKind::mmd_u: return mmd_unbiased(p);
    case StatisticKind::z_w: {
      if (pm.var_w == 0.0) throw DegenerateError("var(W) is zero under the permutation null", "C2");
      const double N = double(pm.m + pm.n);
      const double w = double(pm.m) * p.alpha / N + double(pm.n) * p.beta / N;
      return (w - pm.e_w) / std::sqrt(pm.var_w);
    }
  }
  return 0.0;
}

inline constexpr std::uint64_t kPermutationStream = 0x7065726dULL;  // "perm"

/// (alpha, beta, gamma) for B random relabelings. Replicate r depends only on
/// (plan.seed, r): its X-sample is the first m entries of a partial
/// Fisher-Yates shuffle of 0..N-1 driven by a generator seeded from both.
inline std::vector<PairSums> permutation_replicates(const KernelMatrix& kernel, const SampleLayout& layout,
                                                    std::size_t replicates, std::uint64_t seed) {
  if (kernel.size() != layout.total()) throw SizeError("layout does not match kernel size");
  std::vector<PairSums> out(replicates);
  const LabelSumEvaluator prototype(kernel);
  const std::size_t total = layout.total(), m = layout.m();
  parallel_blocks(replicates, [&](std::size_t begin, std::size_t end) {
    LabelSumEvaluator eval = prototype;
    std::vector<std::size_t> idx(total);
    for (std::size_t r = begin; r < end; ++r) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(seed, kPermutationStream, r));
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      out[r] = eval.evaluate(std::span<const std::size_t>(idx.data(), m));
    }
  });
  return out;
}

/// Upper-tail count with a relative tie tolerance: replicates within
/// 1e-12 * max(|observed|, reference) of the observed value count as ties.
inline std::size_t count_at_least(double observed, std::span<const double> replicates, double reference = 1.0) {
  const double tol = 1e-12 * std::max(std::abs(observed), std::abs(reference));
  return static_cast<std::size_t>(
      std::count_if(replicates.begin(), replicates.end(), [&](double v) { return v >= observed - tol; }));
}

/// (1 + #{replicate >= observed}) / (B + 1).
inline double pvalue_from_replicates(double observed, std::span<const double> replicates,
                                     double reference = 1.0) {
  if (replicates.empty()) throw ParameterError("no permutation replicates");
  return (1.0 + double(count_at_least(observed, replicates, reference))) / (double(replicates.size()) + 1.0);
}

/// Exact p-value: fraction of all assignments (observed included) at least as extreme.
inline double exhaustive_pvalue(double observed, std::span<const double> all_assignments,
                                double reference = 1.0) {
  if (all_assignments.empty()) throw ParameterError("empty enumeration");
  return double(count_at_least(observed, all_assignments, reference)) / double(all_assignments.size());
}

namespace detail {

inline double tie_reference(StatisticKind kind, const KernelAggregates& agg) {
  if (kind != StatisticKind::mmd_u) return 1.0;
  const double n = double(agg.n_total);
  return std::sqrt(std::abs(agg.a) / (n * (n - 1)));
}

}  // namespace detail

/// Null (alpha, beta, gamma) values for a plan: B random replicates or every assignment.
inline std::vector<PairSums> null_pair_sums(const KernelMatrix& kernel, const SampleLayout& layout,
                                            const ResamplingPlan& plan) {
  plan.validate();
  if (plan.scheme == ResamplingPlan::Scheme::exhaustive) {
    return enumerate_permutation_null(kernel, layout, plan.enumeration_cap).assignments;
  }
  return permutation_replicates(kernel, layout, plan.replicates, plan.seed);
}

/// p-value of `kind` for the observed labels against precomputed null sums.
inline double permutation_pvalue_from(StatisticKind kind, const PairSums& observed,
                                      std::span<const PairSums> null_sums, const PermutationMoments& pm,
                                      const KernelAggregates& agg, ResamplingPlan::Scheme scheme) {
  const double obs = statistic_value(kind, observed, pm);
  std::vector<double> values(null_sums.size());
  for (std::size_t r = 0; r < null_sums.size(); ++r) values[r] = statistic_value(kind, null_sums[r], pm);
  const double ref = detail::tie_reference(kind, agg);
  return scheme == ResamplingPlan::Scheme::exhaustive ? exhaustive_pvalue(obs, values, ref)
                                                       : pvalue_from_replicates(obs, values, ref);
}

/// Permutation test of GPK (kind = gpk) or MMD^2_u (kind = mmd_u); upper tail.
inline TestReport permutation_pvalue(const KernelMatrix& kernel, const SampleLayout& layout,
                                     StatisticKind kind, const ResamplingPlan& plan, double level = 0.05) {
  validate_level(level);
  const KernelAggregates agg = compute_aggregates(kernel);
  const PermutationMoments pm = permutation_moments(agg, layout);
  LabelSumEvaluator eval(kernel);
  const PairSums observed = eval.evaluate(layout.labels());
  const double obs = statistic_value(kind, observed, pm);  // fails early on degenerate GPK
  const std::vector<PairSums> null = null_pair_sums(kernel, layout, plan);

  TestReport r;
  r.method = kind == StatisticKind::mmd_u ? Method::mmd_perm : Method::gpk_perm;
  r.statistics[kind == StatisticKind::gpk ? "gpk" : (kind == StatisticKind::mmd_u ? "mmd_u" : "z_w")] = obs;
  r.p_value = permutation_pvalue_from(kind, observed, null, pm, agg, plan.scheme);
  r.level = level;
  r.reject = r.p_value < level;
  r.metadata.seed = plan.seed;
  r.metadata.replicates = null.size();
  r.metadata.scheme = to_string(plan.scheme);
  r.metadata.m = layout.m();
  r.metadata.n = layout.n();
  return r;
}

// ---------------------------------------------------------------------------
// Running several methods on one dataset
// ---------------------------------------------------------------------------

/// Runs each requested method on the same kernel and labels. Permutation
/// methods share one set of null replicates. Degenerate instances produce
/// reports with `error` set instead of throwing, so callers can count them.
inline std::vector<TestReport> run_tests(const KernelMatrix& kernel, const SampleLayout& layout,
                                         std::span<const Method> methods, const ResamplingPlan& plan,
                                         double level, const std::string& bandwidth_rule = {}) {
  validate_level(level);
  if (kernel.size() != layout.total()) throw SizeError("layout does not match kernel size");
  const KernelAggregates agg = compute_aggregates(kernel);
  const PermutationMoments pm = permutation_moments(agg, layout);
  LabelSumEvaluator eval(kernel);
  const PairSums observed = eval.evaluate(layout.labels());

  ReportMetadata meta;
  meta.kernel_kind = to_string(kernel.kind());
  meta.bandwidth_rule = kernel.kind() == KernelKind::gaussian ? bandwidth_rule : "";
  meta.bandwidth = kernel.bandwidth();
  meta.seed = plan.seed;
  meta.m = layout.m();
  meta.n = layout.n();
  if (layout.total() >= 4) {
    DegeneracyReport deg = check_degeneracy(kernel);
    meta.c1_violated = deg.c1_violated;
    meta.c2_violated = deg.c2_violated;
  }

  std::optional<StatisticBundle> bundle;
  std::string bundle_error, bundle_corner;
  try {
    const double weights[] = {kFastWeightHigh, kFastWeightLow};
    bundle = z_statistics(observed, pm, layout, weights);
    bundle->mmd_b = mmd_biased(kernel, layout);
  } catch (const DegenerateError& e) {
    bundle_error = e.what();
    bundle_corner = e.corner_case();
  }

  std::optional<std::vector<PairSums>> null;
  auto ensure_null = [&] {
    if (!null) null = null_pair_sums(kernel, layout, plan);
  };

  std::vector<TestReport> reports;
  for (Method method : methods) {
    TestReport r;
    r.method = method;
    r.level = level;
    r.metadata = meta;
    if (uses_permutations(method)) {
      r.metadata.replicates = plan.scheme == ResamplingPlan::Scheme::exhaustive
                                  ? binomial(layout.total(), layout.m())
                                  : plan.replicates;
      r.metadata.scheme = to_string(plan.scheme);
    }
    const bool needs_bundle = method != Method::mmd_perm;
    if (needs_bundle && !bundle) {
      r.error = bundle_error;
      r.corner_case = bundle_corner;
      r.p_value = std::numeric_limits<double>::quiet_NaN();
      reports.push_back(std::move(r));
      continue;
    }
    switch (method) {
      case Method::gpk_perm:
      case Method::mmd_perm: {
        ensure_null();
        const StatisticKind kind = method == Method::gpk_perm ? StatisticKind::gpk : StatisticKind::mmd_u;
        r.statistics[method == Method::gpk_perm ? "gpk" : "mmd_u"] = statistic_value(kind, observed, pm);
        r.p_value = permutation_pvalue_from(kind, observed, *null, pm, agg, plan.scheme);
        break;
      }
      default: {
        const ComponentPValues c = normal_tail_pvalues(*bundle);
        TestReport combined = method == Method::fgpk         ? fgpk_test(c, level)
                              : method == Method::fgpk_m     ? fgpk_m_test(c.p_w12, c.p_w08, level)
                              : method == Method::fgpk_simes ? fgpk_simes_test(c, level)
                                                             : fgpk_m_simes_test(c.p_w12, c.p_w08, level);
        r.p_value = combined.p_value;
        r.component_p = combined.component_p;
        r.statistics["z_w_1.2"] = bundle->z_w_r.at(kFastWeightHigh);
        r.statistics["z_w_0.8"] = bundle->z_w_r.at(kFastWeightLow);
        if (method == Method::fgpk || method == Method::fgpk_simes) r.statistics["z_d"] = bundle->z_d;
        break;
      }
    }
    r.reject = r.p_value < level;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace kergpk

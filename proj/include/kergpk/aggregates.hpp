#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "kergpk/error.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/matrix.hpp"
#include "kergpk/sums.hpp"

namespace kergpk {

/// Scalar kernel sums over ordered off-diagonal index tuples.
///
///   S = sum_{i!=j} k_ij                    kbar = S / (N^2 - N)
///   A = sum_{i!=j} k_ij^2
///   B = sum_i sum_{j!=i} sum_{u!=i,j} k_ij k_iu
///   C = sum over distinct (i,j,u,v) of k_ij k_uv
///
/// B and C are obtained in O(N^2) from row sums: B = sum_i r_i^2 - A and
/// C = S^2 - 2A - 4B, since the ordered pairs ((i,j),(u,v)) split by overlap
/// into the same pair (2A), one shared index (4B) and disjoint pairs (C).
struct KernelAggregates {
  std::size_t n_total = 0;
  double s = 0.0;
  double kbar = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::vector<double> row_sums;  ///< r_i = sum_{j!=i} k_ij
};

inline KernelAggregates compute_aggregates(const KernelMatrix& kernel) {
  const std::size_t n = kernel.size();
  if (n < 2) throw SizeError("kernel aggregates need N >= 2");
  KernelAggregates agg;
  agg.n_total = n;
  agg.row_sums.assign(n, 0.0);
  // Extended precision keeps the S^2 - 2A - 4B cancellation accurate for large N.
  long double s = 0, a = 0, rr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = kernel.row(i);
    long double r = 0, q = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      r += row[j];
      q += static_cast<long double>(row[j]) * row[j];
    }
    agg.row_sums[i] = static_cast<double>(r);
    s += r;
    a += q;
    rr += r * r;
  }
  long double b = rr - a;
  // No four distinct indices exist below N = 4.
  long double c = n < 4 ? 0.0L : s * s - 2 * a - 4 * b;
  agg.s = static_cast<double>(s);
  agg.kbar = static_cast<double>(s / (static_cast<long double>(n) * (n - 1)));
  agg.a = static_cast<double>(a);
  agg.b = static_cast<double>(b);
  agg.c = static_cast<double>(c);
  return agg;
}

/// f1(x) = x(x-1) / (N(N-1)).
inline double f1(double x, double n) { return x * (x - 1) / (n * (n - 1)); }
/// f2(x) = x(x-1)(x-2) / (N(N-1)(N-2)).
inline double f2(double x, double n) { return x * (x - 1) * (x - 2) / (n * (n - 1) * (n - 2)); }
/// f3(x) = x(x-1)(x-2)(x-3) / (N(N-1)(N-2)(N-3)).
inline double f3(double x, double n) {
  return x * (x - 1) * (x - 2) * (x - 3) / (n * (n - 1) * (n - 2) * (n - 3));
}

inline constexpr double kVarianceTolerance = 1e-12;

/// Mean and variance of a linear combination of (alpha, beta).
struct LinearMoments {
  double mean = 0.0;
  double variance = 0.0;
  bool degenerate = false;  ///< variance vanished (within tolerance of the uncancelled terms)
};

namespace detail {

// v = (uncancelled terms) - (subtracted terms); `scale` bounds their magnitude.
// Values within kVarianceTolerance * scale of zero become exact zeros; clearly
// negative values indicate a bug or broken input and abort.
inline double clamp_variance(double v, double scale, bool& degenerate, const char* what) {
  const double tol = kVarianceTolerance * std::max(scale, std::numeric_limits<double>::min());
  if (std::abs(v) <= tol) {
    degenerate = true;
    return 0.0;
  }
  if (v < 0.0) {
    throw NumericalError(std::string("negative permutation variance for ") + what + ": " +
                         std::to_string(v));
  }
  return v;
}

}  // namespace detail

/// Exact moments of (alpha, beta), W and D under the permutation null.
struct PermutationMoments {
  std::size_t m = 0;
  std::size_t n = 0;
  double e_alpha = 0.0;
  double e_beta = 0.0;
  /// Sigma_{alpha,beta}: {{var alpha, cov}, {cov, var beta}}.
  std::array<std::array<double, 2>, 2> cov_ab{};
  double e_w = 0.0;
  double var_w = 0.0;
  double e_d = 0.0;
  double var_d = 0.0;

  /// Raw second moments E(alpha^2), E(alpha beta), E(beta^2).
  double e_alpha_sq = 0.0;
  double e_alpha_beta = 0.0;
  double e_beta_sq = 0.0;

  bool degenerate = false;  ///< some variance was clamped to zero

  /// Moments of c_alpha * alpha + c_beta * beta, derived from Sigma_{alpha,beta}.
  LinearMoments linear(double c_alpha, double c_beta) const {
    LinearMoments out;
    out.mean = c_alpha * e_alpha + c_beta * e_beta;
    double second = c_alpha * c_alpha * e_alpha_sq + 2 * c_alpha * c_beta * e_alpha_beta +
                    c_beta * c_beta * e_beta_sq;
    double scale = c_alpha * c_alpha * std::abs(e_alpha_sq) +
                   2 * std::abs(c_alpha * c_beta * e_alpha_beta) +
                   c_beta * c_beta * std::abs(e_beta_sq) + out.mean * out.mean;
    out.variance = detail::clamp_variance(second - out.mean * out.mean, scale, out.degenerate,
                                          "linear combination of alpha and beta");
    return out;
  }

  /// Moments of W_r = r m alpha / N + n beta / N.
  LinearMoments weighted_w(double r) const {
    const double total = double(m + n);
    return linear(r * double(m) / total, double(n) / total);
  }
};

/// Closed-form permutation moments from the kernel aggregates. Requires m, n >= 2 and N >= 4.
inline PermutationMoments permutation_moments(const KernelAggregates& agg, const SampleLayout& layout) {
  const std::size_t m_count = layout.m();
  const std::size_t n_count = layout.n();
  if (agg.n_total != layout.total()) {
    throw SizeError("layout size " + std::to_string(layout.total()) + " does not match kernel size " +
                    std::to_string(agg.n_total));
  }
  if (layout.total() < 4) {
    throw SizeError("permutation moments need N >= 4: the (N-3) denominators of f3 and var(W) vanish at N = " +
                    std::to_string(layout.total()));
  }
  const double m = double(m_count), n = double(n_count), N = m + n;
  const double A = agg.a, B = agg.b, C = agg.c, kbar = agg.kbar;
  const double kbar2 = kbar * kbar;

  PermutationMoments pm;
  pm.m = m_count;
  pm.n = n_count;
  pm.e_alpha = kbar;
  pm.e_beta = kbar;

  const double mm = m * m * (m - 1) * (m - 1);
  const double nn = n * n * (n - 1) * (n - 1);
  pm.e_alpha_sq = (2 * A * f1(m, N) + 4 * B * f2(m, N) + C * f3(m, N)) / mm;
  pm.e_beta_sq = (2 * A * f1(n, N) + 4 * B * f2(n, N) + C * f3(n, N)) / nn;
  pm.e_alpha_beta = C / (N * (N - 1) * (N - 2) * (N - 3));

  const double scale11 =
      (std::abs(2 * A * f1(m, N)) + std::abs(4 * B * f2(m, N)) + std::abs(C * f3(m, N))) / mm + kbar2;
  const double scale22 =
      (std::abs(2 * A * f1(n, N)) + std::abs(4 * B * f2(n, N)) + std::abs(C * f3(n, N))) / nn + kbar2;
  const double scale12 = std::abs(pm.e_alpha_beta) + kbar2;

  bool degenerate = false;
  double s11 = detail::clamp_variance(pm.e_alpha_sq - kbar2, scale11, degenerate, "alpha");
  double s22 = detail::clamp_variance(pm.e_beta_sq - kbar2, scale22, degenerate, "beta");
  double s12 = pm.e_alpha_beta - kbar2;
  if (std::abs(s12) <= kVarianceTolerance * scale12) s12 = 0.0;
  pm.cov_ab = {{{s11, s12}, {s12, s22}}};

  pm.e_w = kbar;
  const double s2 = 2 * A + 4 * B + C;  // equals S^2
  {
    const double num = (N - 2) * 2 * A + 2 * s2 / (N - 1) - (4 * A + 4 * B);
    const double num_scale = std::abs((N - 2) * 2 * A) + std::abs(2 * s2 / (N - 1)) + std::abs(4 * A + 4 * B);
    const double den = N * N * N * (N - 1) * (N - 3) * (m - 1) * (n - 1);
    pm.var_w = detail::clamp_variance(m * n * num / den, m * n * num_scale / den, degenerate, "W");
  }

  pm.e_d = (m - n) * (N - 1) * kbar;
  {
    const double num = (4 * A + 4 * B) - 4 * s2 / N;
    const double num_scale = std::abs(4 * A + 4 * B) + std::abs(4 * s2 / N);
    const double den = N * (N - 1);
    pm.var_d = detail::clamp_variance(m * n * num / den, m * n * num_scale / den, degenerate, "D");
  }
  pm.degenerate = degenerate;
  return pm;
}

/// Number of ways to choose k of n; saturates at uint64 max.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Every equally likely X-assignment of an exhaustive permutation null.
struct PermutationNull {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<PairSums> assignments;

  double mean_alpha() const { return mean([](const PairSums& p) { return p.alpha; }); }
  double mean_beta() const { return mean([](const PairSums& p) { return p.beta; }); }

  /// Population covariance matrix of (alpha, beta) over the assignments.
  std::array<std::array<double, 2>, 2> covariance() const {
    const double ma = mean_alpha(), mb = mean_beta();
    double saa = 0, sab = 0, sbb = 0;
    for (const auto& p : assignments) {
      saa += (p.alpha - ma) * (p.alpha - ma);
      sab += (p.alpha - ma) * (p.beta - mb);
      sbb += (p.beta - mb) * (p.beta - mb);
    }
    const double cnt = double(assignments.size());
    return {{{saa / cnt, sab / cnt}, {sab / cnt, sbb / cnt}}};
  }

 private:
  template <typename F>
  double mean(F f) const {
    double s = 0;
    for (const auto& p : assignments) s += f(p);
    return s / double(assignments.size());
  }
};

/// Visits every m-subset of {0, ..., n_total - 1} in lexicographic order.
template <typename Visit>
void for_each_subset(std::size_t n_total, std::size_t m, Visit&& visit) {
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    visit(std::span<const std::size_t>(idx));
    std::size_t pos = m;
    while (pos > 0 && idx[pos - 1] == n_total - m + pos - 1) --pos;
    if (pos == 0) return;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

/// Enumerates all C(N, m) label assignments. Throws EnumerationCapError above `cap`.
inline PermutationNull enumerate_permutation_null(const KernelMatrix& kernel, const SampleLayout& layout,
                                                  std::uint64_t cap = kDefaultEnumerationCap) {
  if (kernel.size() != layout.total()) throw SizeError("layout does not match kernel size");
  const std::uint64_t count = binomial(layout.total(), layout.m());
  if (count > cap) {
    throw EnumerationCapError("exhaustive enumeration needs C(" + std::to_string(layout.total()) + ", " +
                              std::to_string(layout.m()) + ") = " + std::to_string(count) +
                              " assignments, above the cap of " + std::to_string(cap) +
                              "; use random permutations instead");
  }
  PermutationNull out;
  out.m = layout.m();
  out.n = layout.n();
  out.assignments.reserve(count);
  LabelSumEvaluator eval(kernel);
  for_each_subset(layout.total(), layout.m(),
                  [&](std::span<const std::size_t> x) { out.assignments.push_back(eval.evaluate(x)); });
  return out;
}

}  // namespace kergpk

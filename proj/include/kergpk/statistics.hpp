#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kergpk/aggregates.hpp"
#include "kergpk/error.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/sums.hpp"

namespace kergpk {

/// alpha, beta, gamma for the layout's labeling.
inline PairSums pair_sums(const KernelMatrix& kernel, const SampleLayout& layout) {
  if (kernel.size() != layout.total()) throw SizeError("layout does not match kernel size");
  LabelSumEvaluator eval(kernel);
  return eval.evaluate(layout.labels());
}

/// Unbiased MMD^2: alpha + beta - 2 gamma.
inline double mmd_unbiased(const PairSums& p) { return p.alpha + p.beta - 2.0 * p.gamma; }

/// Biased MMD^2 (V-statistic), diagonal kernel values included. Allows m, n >= 1.
inline double mmd_biased(const KernelMatrix& kernel, std::span<const unsigned char> labels) {
  if (labels.size() != kernel.size()) throw SizeError("labels do not match kernel size");
  double sxx = 0, syy = 0, sxy = 0;
  std::size_t m = 0, n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 0 ? m : n) += 1;
  if (m < 1 || n < 1) throw SizeError("biased MMD needs at least one observation per sample");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      double k = kernel(i, j);
      if (labels[i] == 0 && labels[j] == 0) sxx += k;
      else if (labels[i] == 1 && labels[j] == 1) syy += k;
      else if (labels[i] == 0) sxy += k;
    }
  }
  const double dm = double(m), dn = double(n);
  return sxx / (dm * dm) + syy / (dn * dn) - 2.0 * sxy / (dm * dn);
}

inline double mmd_biased(const KernelMatrix& kernel, const SampleLayout& layout) {
  return mmd_biased(kernel, layout.labels());
}

inline constexpr double kDeterminantTolerance = 1e-14;

/// GPK quadratic form of (alpha - E alpha, beta - E beta) under the inverse
/// permutation covariance. Throws DegenerateError when Sigma is singular.
inline double gpk_statistic(const PairSums& p, const PermutationMoments& pm) {
  const double s11 = pm.cov_ab[0][0], s12 = pm.cov_ab[0][1], s22 = pm.cov_ab[1][1];
  const double scale = std::max({std::abs(s11), std::abs(s12), std::abs(s22)});
  const double det = s11 * s22 - s12 * s12;
  if (scale == 0.0 || std::abs(det) <= kDeterminantTolerance * scale * scale) {
    std::string corner = pm.var_d == 0.0 ? "C1" : (pm.var_w == 0.0 ? "C2" : "");
    throw DegenerateError(
        "GPK is undefined: the permutation covariance of (alpha, beta) is singular" +
            (corner.empty() ? std::string(" (kernel corner case)") : " (kernel corner case " + corner + ")") +
            "; see check_degeneracy",
        corner);
  }
  const double da = p.alpha - pm.e_alpha;
  const double db = p.beta - pm.e_beta;
  return (s22 * da * da - 2.0 * s12 * da * db + s11 * db * db) / det;
}

/// Statistic values for one labeled sample.
struct StatisticBundle {
  double mmd_u = 0.0;
  double mmd_b = std::numeric_limits<double>::quiet_NaN();
  double gpk = 0.0;
  double w = 0.0;
  double d = 0.0;
  double z_w = 0.0;
  double z_d = 0.0;
  std::map<double, double> z_w_r;  ///< r -> Z_{W,r}
};

inline constexpr double kFastWeightHigh = 1.2;
inline constexpr double kFastWeightLow = 0.8;

/// W, D, Z_W, Z_D, Z_{W,r} and GPK. Throws DegenerateError on zero variances.
inline StatisticBundle z_statistics(const PairSums& p, const PermutationMoments& pm,
                                    const SampleLayout& layout, std::span<const double> weights) {
  if (pm.m != layout.m() || pm.n != layout.n()) throw SizeError("moments were computed for another layout");
  const double m = double(layout.m()), n = double(layout.n()), N = m + n;
  if (pm.var_d == 0.0) throw DegenerateError("var(D) is zero under the permutation null (corner case C1)", "C1");
  if (pm.var_w == 0.0) throw DegenerateError("var(W) is zero under the permutation null (corner case C2)", "C2");

  StatisticBundle out;
  out.mmd_u = mmd_unbiased(p);
  out.w = m * p.alpha / N + n * p.beta / N;
  out.d = m * (m - 1) * p.alpha - n * (n - 1) * p.beta;
  out.z_w = (out.w - pm.e_w) / std::sqrt(pm.var_w);
  out.z_d = (out.d - pm.e_d) / std::sqrt(pm.var_d);
  for (double r : weights) {
    if (r == 1.0) {
      out.z_w_r[r] = out.z_w;
      continue;
    }
    LinearMoments lm = pm.weighted_w(r);
    if (lm.variance == 0.0) {
      throw DegenerateError("var(W_r) is zero for r = " + std::to_string(r));
    }
    const double wr = r * m * p.alpha / N + n * p.beta / N;
    out.z_w_r[r] = (wr - lm.mean) / std::sqrt(lm.variance);
  }
  out.gpk = gpk_statistic(p, pm);
  return out;
}

/// Kernel corner cases that make GPK undefined, plus finite-sample diagnostics
/// for the normal approximation of Z_D and Z_{W,r}.
struct DegeneracyReport {
  bool c1_violated = false;           ///< all row sums equal
  bool c2_violated = false;           ///< r_i - (N-2) k_ip equal for i != p, some pivot p
  bool c2_given_order = false;        ///< C2 holds with the last index as pivot
  std::optional<std::size_t> c2_pivot;  ///< first pivot found satisfying C2
  double condition1_ratio = 0.0;      ///< sum |kt_i.|^3 / (sum kt_i.^2)^{3/2}
  double condition2_ratio = 0.0;      ///< sum_{i!=j} kt_ij^2 / sum kt_i.^2

  bool any() const noexcept { return c1_violated || c2_violated; }
};

inline DegeneracyReport check_degeneracy(const KernelMatrix& kernel) {
  const std::size_t n = kernel.size();
  if (n < 4) throw SizeError("degeneracy checks need N >= 4");
  const KernelAggregates agg = compute_aggregates(kernel);
  const double tol = 1e-10 * std::max(1.0, std::abs(agg.kbar) * double(n));
  DegeneracyReport rep;

  auto [rmin, rmax] = std::minmax_element(agg.row_sums.begin(), agg.row_sums.end());
  rep.c1_violated = (*rmax - *rmin) <= tol;

  auto c2_holds = [&](std::size_t pivot) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == pivot) continue;
      double v = agg.row_sums[i] - double(n - 2) * kernel(i, pivot);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo <= tol;
  };
  rep.c2_given_order = c2_holds(n - 1);
  if (rep.c2_given_order) {
    rep.c2_pivot = n - 1;
  } else {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      if (c2_holds(p)) {
        rep.c2_pivot = p;
        break;
      }
    }
  }
  rep.c2_violated = rep.c2_pivot.has_value();

  // Centered kernel kt_ij = (k_ij - kbar) 1[i != j].
  double sum_row2 = 0, sum_row3 = 0, sum_kt2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double rt = agg.row_sums[i] - double(n - 1) * agg.kbar;
    sum_row2 += rt * rt;
    sum_row3 += std::abs(rt) * rt * rt;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double kt = kernel(i, j) - agg.kbar;
      sum_kt2 += kt * kt;
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  rep.condition1_ratio = sum_row2 > 0 ? sum_row3 / std::pow(sum_row2, 1.5) : inf;
  rep.condition2_ratio = sum_row2 > 0 ? sum_kt2 / sum_row2 : inf;
  return rep;
}

/// alpha - gamma and beta - gamma with their permutation-standardized values.
struct DifferenceBreakdown {
  double alpha_minus_gamma = 0.0;
  double beta_minus_gamma = 0.0;
  double alpha_minus_gamma_std = 0.0;
  double beta_minus_gamma_std = 0.0;
};

/// gamma = (S - m(m-1) alpha - n(n-1) beta) / (2mn), so both differences are
/// linear in (alpha, beta) and have permutation mean zero.
inline DifferenceBreakdown difference_breakdown(const PairSums& p, const PermutationMoments& pm,
                                                const KernelAggregates& agg) {
  const double m = double(pm.m), n = double(pm.n);
  const double cx = m * (m - 1) / (2 * m * n);
  const double cy = n * (n - 1) / (2 * m * n);
  const double offset = agg.s / (2 * m * n);
  DifferenceBreakdown out;
  out.alpha_minus_gamma = p.alpha - p.gamma;
  out.beta_minus_gamma = p.beta - p.gamma;
  LinearMoments ag = pm.linear(1 + cx, cy);
  LinearMoments bg = pm.linear(cx, 1 + cy);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.alpha_minus_gamma_std =
      ag.variance > 0 ? (out.alpha_minus_gamma - (ag.mean - offset)) / std::sqrt(ag.variance) : nan;
  out.beta_minus_gamma_std =
      bg.variance > 0 ? (out.beta_minus_gamma - (bg.mean - offset)) / std::sqrt(bg.variance) : nan;
  return out;
}

/// Everything computed for one labeled kernel matrix.
struct Analysis {
  KernelAggregates aggregates;
  PermutationMoments moments;
  PairSums pair;
  StatisticBundle bundle;
};

/// Runs aggregates -> moments -> statistics. Default weights are {1.2, 0.8}.
inline Analysis analyze(const KernelMatrix& kernel, const SampleLayout& layout,
                        std::span<const double> weights = {}) {
  static constexpr double kDefaultWeights[] = {kFastWeightHigh, kFastWeightLow};
  if (weights.empty()) weights = kDefaultWeights;
  Analysis a;
  a.aggregates = compute_aggregates(kernel);
  a.moments = permutation_moments(a.aggregates, layout);
  a.pair = pair_sums(kernel, layout);
  a.bundle = z_statistics(a.pair, a.moments, layout, weights);
  a.bundle.mmd_b = mmd_biased(kernel, layout);
  return a;
}

}  // namespace kergpk

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kergpk/error.hpp"
#include "kergpk/matrix.hpp"
#include "kergpk/parallel.hpp"

namespace kergpk {

enum class KernelKind { gaussian, precomputed };

inline const char* to_string(KernelKind k) {
  return k == KernelKind::gaussian ? "gaussian" : "precomputed";
}

/// How the Gaussian bandwidth is chosen.
///  - median:         sigma^2 = median(d_ij^2) / 2, i.e. k = exp(-d^2 / median(d^2))
///  - median_literal: sigma = median(d_ij)
///  - fixed:          sigma = value
struct BandwidthChoice {
  enum class Rule { median, median_literal, fixed };
  Rule rule = Rule::median;
  double value = 0.0;

  static BandwidthChoice median() { return {Rule::median, 0.0}; }
  static BandwidthChoice median_literal() { return {Rule::median_literal, 0.0}; }
  static BandwidthChoice fixed(double sigma) { return {Rule::fixed, sigma}; }

  std::string name() const {
    switch (rule) {
      case Rule::median: return "median";
      case Rule::median_literal: return "median-literal";
      case Rule::fixed: return "fixed";
    }
    return "unknown";
  }
};

/// Symmetric N x N kernel matrix with provenance.
class KernelMatrix {
 public:
  KernelMatrix(SquareMatrix entries, KernelKind kind, std::optional<double> bandwidth)
      : entries_(std::move(entries)), kind_(kind), bandwidth_(bandwidth) {}

  std::size_t size() const noexcept { return entries_.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
  std::span<const double> row(std::size_t i) const noexcept { return entries_.row(i); }
  const SquareMatrix& entries() const noexcept { return entries_; }
  KernelKind kind() const noexcept { return kind_; }
  /// Gaussian bandwidth sigma; empty for precomputed kernels.
  std::optional<double> bandwidth() const noexcept { return bandwidth_; }

 private:
  SquareMatrix entries_;
  KernelKind kind_;
  std::optional<double> bandwidth_;
};

/// Euclidean distance matrix of the pooled observations.
inline SquareMatrix pairwise_distances(const ObservationSet& pool) {
  const std::size_t n = pool.rows();
  const std::size_t dim = pool.dim();
  for (double v : pool.values()) {
    if (!std::isfinite(v)) throw DataError("non-finite observation value");
  }
  SquareMatrix d(n);
  parallel_for(n, [&](std::size_t i) {
    auto xi = pool.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto xj = pool.row(j);
      double ss = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double diff = xi[c] - xj[c];
        ss += diff * diff;
      }
      d(i, j) = std::sqrt(std::max(0.0, ss));
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) d(i, j) = d(j, i);
  return d;
}

namespace detail {

// Midpoint median; reorders `v`.
inline double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Median-heuristic bandwidth from the upper-triangle distances.
/// Throws SizeError for N < 2 and DataError when every distance is zero.
inline double median_heuristic_bandwidth(const SquareMatrix& distances,
                                         BandwidthChoice::Rule rule = BandwidthChoice::Rule::median) {
  const std::size_t n = distances.size();
  if (n < 2) throw SizeError("median heuristic needs at least two observations");
  std::vector<double> upper;
  upper.reserve(n * (n - 1) / 2);
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = distances(i, j);
      any_positive = any_positive || d > 0.0;
      upper.push_back(rule == BandwidthChoice::Rule::median_literal ? d : d * d);
    }
  }
  if (!any_positive) {
    throw DataError("all pairwise distances are zero; the Gaussian kernel would be constant (corner case C1)");
  }
  double med = detail::median_inplace(upper);
  double sigma = rule == BandwidthChoice::Rule::median_literal ? med : std::sqrt(med / 2.0);
  if (!(sigma > 0.0)) {
    throw DataError("median pairwise distance is zero; choose a fixed bandwidth instead");
  }
  return sigma;
}

/// k_ij = exp(-d_ij^2 / (2 sigma^2)), unit diagonal.
inline KernelMatrix gaussian_kernel_matrix(const SquareMatrix& distances, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("Gaussian bandwidth must be positive and finite, got " + std::to_string(sigma));
  }
  const std::size_t n = distances.size();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  SquareMatrix k(n);
  parallel_for(n, [&](std::size_t i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = distances(i, j);
      k(i, j) = std::exp(-d * d * scale);
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
  return KernelMatrix(std::move(k), KernelKind::gaussian, sigma);
}

/// Resolves the bandwidth for `choice` against a distance matrix.
inline double resolve_bandwidth(const SquareMatrix& distances, const BandwidthChoice& choice) {
  switch (choice.rule) {
    case BandwidthChoice::Rule::fixed:
      if (!(choice.value > 0.0)) throw ParameterError("fixed bandwidth must be positive");
      return choice.value;
    default:
      return median_heuristic_bandwidth(distances, choice.rule);
  }
}

/// Distances, bandwidth and Gaussian kernel of the pooled sample in one call.
inline KernelMatrix build_gaussian_kernel(const ObservationSet& pooled,
                                          const BandwidthChoice& choice = BandwidthChoice::median()) {
  SquareMatrix d = pairwise_distances(pooled);
  return gaussian_kernel_matrix(d, resolve_bandwidth(d, choice));
}

inline constexpr double kSymmetryTolerance = 1e-9;

/// Accepts a user-supplied kernel. Entries whose asymmetry is within 1e-9 are
/// averaged; larger asymmetry, non-square shape, or non-finite values throw DataError.
inline KernelMatrix load_precomputed_kernel(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) throw DataError("precomputed kernel is empty");
  SquareMatrix k(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw DataError("precomputed kernel is not square: row " + std::to_string(i + 1) + " has " +
                      std::to_string(rows[i].size()) + " entries, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(rows[i][j])) {
        throw DataError("non-finite kernel entry at (" + std::to_string(i + 1) + ", " +
                        std::to_string(j + 1) + ")");
      }
      k(i, j) = rows[i][j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double a = k(i, j), b = k(j, i);
      if (std::abs(a - b) > kSymmetryTolerance) {
        throw DataError("precomputed kernel is not symmetric at (" + std::to_string(i + 1) + ", " +
                        std::to_string(j + 1) + "): " + std::to_string(a) + " vs " + std::to_string(b));
      }
      double avg = 0.5 * (a + b);
      k(i, j) = avg;
      k(j, i) = avg;
    }
  }
  return KernelMatrix(std::move(k), KernelKind::precomputed, std::nullopt);
}

inline KernelMatrix load_precomputed_kernel(const SquareMatrix& m) {
  std::vector<std::vector<double>> rows(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) rows[i].assign(m.row(i).begin(), m.row(i).end());
  return load_precomputed_kernel(rows);
}

}  // namespace kergpk

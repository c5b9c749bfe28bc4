#pragma once

// Brute-force reference computations. Nothing here calls the library's
// aggregate, moment or statistic code; they are the independent side of every
// dual-route check in the test suites.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

struct Aggregates {
  double s = 0, a = 0, b = 0, c = 0;
};

/// Literal sums over ordered index tuples: O(N^3) for B, O(N^4) for C.
inline Aggregates brute_aggregates(const Matrix& k) {
  const std::size_t n = k.size();
  Aggregates out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      out.s += k[i][j];
      out.a += k[i][j] * k[i][j];
      for (std::size_t u = 0; u < n; ++u) {
        if (u == i || u == j) continue;
        out.b += k[i][j] * k[i][u];
        for (std::size_t v = 0; v < n; ++v) {
          if (v == i || v == j || v == u) continue;
          out.c += k[i][j] * k[u][v];
        }
      }
    }
  return out;
}

/// S, A, B, C by a second O(N^2) route, for sizes where the quadruple loop is
/// out of reach: for each ordered pair (i, j), the disjoint ordered pairs sum to
/// S - 2 r_i - 2 r_j + 2 k_ij. Works with any matrix exposing size() and (i, j).
template <typename K>
Aggregates row_route_aggregates(const K& k) {
  const std::size_t n = k.size();
  std::vector<long double> r(n, 0.0L);
  long double s = 0, a = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      r[i] += k(i, j);
      a += static_cast<long double>(k(i, j)) * k(i, j);
    }
  for (auto v : r) s += v;
  long double b = 0, c = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const long double kij = k(i, j);
      b += kij * (r[i] - kij);
      if (n >= 4) c += kij * (s - 2 * r[i] - 2 * r[j] + 2 * kij);
    }
  return {double(s), double(a), double(b), double(c)};
}

struct AlphaBeta {
  double alpha, beta, gamma;
};

/// alpha, beta, gamma for a 0/1 label vector by direct double loops.
inline AlphaBeta direct_sums(const Matrix& k, const std::vector<int>& g) {
  const std::size_t n = k.size();
  double sxx = 0, syy = 0, sxy = 0;
  double m = 0, nn = 0;
  for (std::size_t i = 0; i < n; ++i) (g[i] == 0 ? m : nn) += 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (g[i] == 0 && g[j] == 0) sxx += k[i][j];
      if (g[i] == 1 && g[j] == 1) syy += k[i][j];
      if (g[i] == 0 && g[j] == 1) sxy += k[i][j];
    }
  return {sxx / (m * (m - 1)), syy / (nn * (nn - 1)), sxy / (m * nn)};
}

/// Every labeling with exactly m zeros, via bitmasks (N <= 20).
inline std::vector<AlphaBeta> enumerate(const Matrix& k, std::size_t m) {
  const std::size_t n = k.size();
  std::vector<AlphaBeta> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::size_t(__builtin_popcount(mask)) != m) continue;
    std::vector<int> g(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) g[i] = 0;
    out.push_back(direct_sums(k, g));
  }
  return out;
}

struct Summary {
  double mean_a = 0, mean_b = 0, var_a = 0, var_b = 0, cov_ab = 0;
};

inline Summary summarize(const std::vector<AlphaBeta>& v) {
  Summary s;
  for (const auto& p : v) {
    s.mean_a += p.alpha;
    s.mean_b += p.beta;
  }
  s.mean_a /= double(v.size());
  s.mean_b /= double(v.size());
  for (const auto& p : v) {
    s.var_a += (p.alpha - s.mean_a) * (p.alpha - s.mean_a);
    s.var_b += (p.beta - s.mean_b) * (p.beta - s.mean_b);
    s.cov_ab += (p.alpha - s.mean_a) * (p.beta - s.mean_b);
  }
  s.var_a /= double(v.size());
  s.var_b /= double(v.size());
  s.cov_ab /= double(v.size());
  return s;
}

/// Mean and population variance of f over the enumeration.
template <typename F>
std::pair<double, double> mean_var(const std::vector<AlphaBeta>& v, F f) {
  double mean = 0;
  for (const auto& p : v) mean += f(p);
  mean /= double(v.size());
  double var = 0;
  for (const auto& p : v) var += (f(p) - mean) * (f(p) - mean);
  return {mean, var / double(v.size())};
}

/// Solves a dense linear system by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

/// Symmetric matrix with uniform(lo, hi) off-diagonal entries and unit diagonal.
inline Matrix random_symmetric(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix k(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) k[i][j] = k[j][i] = u(rng);
  return k;
}

/// Gaussian kernel of random normal points with a fixed bandwidth, computed entry by entry.
inline Matrix random_gaussian_kernel(std::size_t n, std::size_t d, std::mt19937_64& rng, double sigma = 1.5) {
  std::normal_distribution<double> z(0, 1);
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts)
    for (auto& v : p) v = z(rng);
  Matrix k(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ss = 0;
      for (std::size_t c = 0; c < d; ++c) ss += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
      k[i][j] = std::exp(-ss / (2 * sigma * sigma));
    }
  return k;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

/// |a - b| relative to `scale`, for quantities whose natural size is not their own value.
inline double scaled_diff(double a, double b, double scale) { return std::abs(a - b) / std::max(1e-300, scale); }

}  // namespace oracle

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kergpk/error.hpp"
#include "kergpk/inference.hpp"
#include "kergpk/kernel.hpp"
#include "kergpk/matrix.hpp"
#include "kergpk/parallel.hpp"

namespace kergpk {

enum class Family { gaussian, student_t20, chisq3 };
enum class CovarianceKind { ar04, identity };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::student_t20: return "student_t20";
    case Family::chisq3: return "chisq3";
  }
  return "unknown";
}

inline const char* to_string(CovarianceKind c) { return c == CovarianceKind::ar04 ? "ar04" : "identity"; }

/// X ~ F(0, Sigma) versus Y ~ F(a 1_d, sigma2 Sigma) for the chosen family.
struct ScenarioSpec {
  Family family = Family::gaussian;
  std::size_t d = 50;
  std::size_t m = 50;
  std::size_t n = 50;
  double a = 0.0;       ///< per-coordinate mean shift
  double sigma2 = 1.0;  ///< scale multiplier
  CovarianceKind cov = CovarianceKind::ar04;

  /// ||a 1_d||_2.
  double delta() const { return std::abs(a) * std::sqrt(double(d)); }

  void validate() const {
    if (d < 1) throw ParameterError("scenario dimension must be at least 1");
    if (!(sigma2 > 0.0)) throw ParameterError("scenario sigma2 must be positive");
    if (m < 2 || n < 2) throw ParameterError("scenario sample sizes must be at least 2");
    if (!std::isfinite(a)) throw ParameterError("scenario shift must be finite");
  }
};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
inline SquareMatrix cholesky(const SquareMatrix& s) {
  const std::size_t d = s.size();
  SquareMatrix l(d);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = s(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw NumericalError("matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

/// Symmetric positive square root S^{1/2} of a symmetric positive-definite matrix.
inline SquareMatrix symmetric_sqrt(const SquareMatrix& s) {
  const std::size_t d = s.size();
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = s(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("matrix is not positive definite");
  }
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  SquareMatrix out(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = 0.5 * (root(i, j) + root(j, i));
  return out;
}

/// Population covariance Sigma of the scenario (before the sigma2 scaling).
inline SquareMatrix scenario_covariance(CovarianceKind kind, std::size_t d) {
  SquareMatrix s(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      s(i, j) = kind == CovarianceKind::identity ? (i == j ? 1.0 : 0.0)
                                                 : std::pow(0.4, std::abs(double(i) - double(j)));
  return s;
}

inline constexpr std::uint64_t kDataStream = 0x64617461ULL;        // "data"
inline constexpr std::uint64_t kTrialPermStream = 0x74706572ULL;   // "tper"

/// Draws datasets for one scenario; caches the covariance root. Gaussian and
/// t coordinates use the Cholesky factor (the law does not depend on the root);
/// chi-square coordinates use the symmetric root.
class ScenarioSampler {
 public:
  explicit ScenarioSampler(const ScenarioSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.cov == CovarianceKind::ar04) {
      const SquareMatrix sigma = scenario_covariance(spec_.cov, spec_.d);
      full_root_ = spec_.family == Family::chisq3;
      factor_ = full_root_ ? symmetric_sqrt(sigma) : cholesky(sigma);
    }
  }

  const ScenarioSpec& spec() const noexcept { return spec_; }

  /// Dataset for `seed`; identical seeds give identical data.
  std::pair<ObservationSet, ObservationSet> sample(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    ObservationSet x = draw(rng, spec_.m, 0.0, 1.0);
    ObservationSet y = draw(rng, spec_.n, spec_.a, std::sqrt(spec_.sigma2));
    return {std::move(x), std::move(y)};
  }

 private:
  ObservationSet draw(std::mt19937_64& rng, std::size_t rows, double shift, double scale) const {
    const std::size_t d = spec_.d;
    std::vector<double> out(rows * d);
    std::vector<double> u(d);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::chi_squared_distribution<double> chisq3(3.0);
    std::chi_squared_distribution<double> chisq20(20.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double mix = 1.0;
      if (spec_.family == Family::chisq3) {
        for (auto& v : u) v = chisq3(rng);
      } else {
        for (auto& v : u) v = normal(rng);
        if (spec_.family == Family::student_t20) mix = 1.0 / std::sqrt(chisq20(rng) / 20.0);
      }
      double* row = out.data() + r * d;
      for (std::size_t i = 0; i < d; ++i) {
        double v = u[i];
        if (spec_.cov == CovarianceKind::ar04) {
          v = 0.0;
          auto li = factor_.row(i);
          const std::size_t last = full_root_ ? d : i + 1;
          for (std::size_t k = 0; k < last; ++k) v += li[k] * u[k];
        }
        row[i] = shift + scale * mix * v;
      }
    }
    return ObservationSet(rows, d, std::move(out));
  }

  ScenarioSpec spec_;
  SquareMatrix factor_;
  bool full_root_ = false;
};

inline std::pair<ObservationSet, ObservationSet> sample_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  return ScenarioSampler(spec).sample(seed);
}

/// Comparison slot for tests implemented outside the library. Returns a p-value.
struct ExternalMethod {
  std::string name;
  std::function<double(const ObservationSet& x, const ObservationSet& y, std::uint64_t seed)> p_value;
};

struct PowerEstimate {
  ScenarioSpec scenario;
  std::string method;
  std::size_t trials = 0;
  std::size_t invalid = 0;  ///< degenerate trials, excluded from the denominator
  double level = 0.05;
  std::size_t rejections = 0;
  double power = 0.0;
  double mc_stderr = 0.0;
};

struct PowerOptions {
  std::vector<Method> methods;
  std::size_t trials = 1000;
  double level = 0.05;
  std::uint64_t seed = 0;
  std::size_t replicates = 1000;  ///< permutations per trial for gpk_perm / mmd_perm
  BandwidthChoice bandwidth = BandwidthChoice::median();
  std::vector<ExternalMethod> external;
};

/// Monte Carlo rejection rates. Trial t draws data from derive_seed(seed, data, t);
/// every method in that trial sees the same data, kernel and permutations.
inline std::vector<PowerEstimate> estimate_power(const ScenarioSpec& spec, const PowerOptions& opt) {
  if (opt.trials < 1) throw ParameterError("power estimation needs at least one trial");
  validate_level(opt.level);
  const ScenarioSampler sampler(spec);
  const std::size_t n_methods = opt.methods.size() + opt.external.size();
  // 0 = accept, 1 = reject, 2 = invalid
  std::vector<unsigned char> outcome(opt.trials * n_methods, 0);

  parallel_for(opt.trials, [&](std::size_t t) {
    auto [x, y] = sampler.sample(derive_seed(opt.seed, kDataStream, t));
    unsigned char* row = outcome.data() + t * n_methods;
    if (!opt.methods.empty()) {
      const SampleLayout layout(x.rows(), y.rows());
      ResamplingPlan plan;
      plan.replicates = opt.replicates;
      plan.seed = derive_seed(opt.seed, kTrialPermStream, t);
      try {
        const KernelMatrix kernel = build_gaussian_kernel(pool(x, y), opt.bandwidth);
        auto reports = run_tests(kernel, layout, opt.methods, plan, opt.level, opt.bandwidth.name());
        for (std::size_t k = 0; k < reports.size(); ++k) row[k] = reports[k].ok() ? (reports[k].reject ? 1 : 0) : 2;
      } catch (const DegenerateError&) {
        for (std::size_t k = 0; k < opt.methods.size(); ++k) row[k] = 2;
      } catch (const DataError&) {
        for (std::size_t k = 0; k < opt.methods.size(); ++k) row[k] = 2;
      }
    }
    for (std::size_t e = 0; e < opt.external.size(); ++e) {
      const double p = opt.external[e].p_value(x, y, derive_seed(opt.seed, e + 1, t));
      row[opt.methods.size() + e] = std::isfinite(p) ? (p < opt.level ? 1 : 0) : 2;
    }
  });

  std::vector<PowerEstimate> out;
  for (std::size_t k = 0; k < n_methods; ++k) {
    PowerEstimate est;
    est.scenario = spec;
    est.method = k < opt.methods.size() ? to_string(opt.methods[k]) : opt.external[k - opt.methods.size()].name;
    est.trials = opt.trials;
    est.level = opt.level;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      unsigned char o = outcome[t * n_methods + k];
      est.rejections += o == 1;
      est.invalid += o == 2;
    }
    const std::size_t valid = est.trials - est.invalid;
    if (valid > 0) {
      est.power = double(est.rejections) / double(valid);
      est.mc_stderr = std::sqrt(est.power * (1.0 - est.power) / double(valid));
    } else {
      est.power = std::numeric_limits<double>::quiet_NaN();
      est.mc_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(est));
  }
  return out;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "table1",       "table4_loc",   "table4_scale", "table5_loc",   "table5_scale",
      "table6_loc",   "table6_scale", "table7_loc",   "table7_scale", "null_sizes"};
  return names;
}

/// Scenario grids of the published power and size tables. Location presets
/// store Delta = ||a 1_d|| and derive a = Delta / sqrt(d).
inline std::vector<ScenarioSpec> scenario_table(const std::string& preset) {
  const std::size_t dims[] = {50, 100, 500, 1000};
  auto location = [&](Family f, std::size_t m, std::size_t n, std::array<double, 4> deltas) {
    std::vector<ScenarioSpec> out;
    for (std::size_t k = 0; k < 4; ++k)
      out.push_back({f, dims[k], m, n, deltas[k] / std::sqrt(double(dims[k])), 1.0, CovarianceKind::ar04});
    return out;
  };
  auto scale = [&](Family f, std::size_t m, std::size_t n, std::array<double, 4> sigma2) {
    std::vector<ScenarioSpec> out;
    for (std::size_t k = 0; k < 4; ++k) out.push_back({f, dims[k], m, n, 0.0, sigma2[k], CovarianceKind::ar04});
    return out;
  };

  if (preset == "table1") {
    return {{Family::gaussian, 50, 50, 50, 0.21, 1.0, CovarianceKind::ar04},
            {Family::gaussian, 50, 50, 50, 0.21, 1.04, CovarianceKind::ar04},
            {Family::gaussian, 50, 50, 50, 0.0, 1.1, CovarianceKind::ar04}};
  }
  if (preset == "table4_loc") return location(Family::gaussian, 50, 50, {1.13, 1.50, 2.23, 2.84});
  if (preset == "table4_scale") return scale(Family::gaussian, 50, 50, {1.11, 1.09, 1.05, 1.04});
  if (preset == "table5_loc") return location(Family::gaussian, 100, 50, {0.98, 1.30, 2.01, 2.84});
  if (preset == "table5_scale") return scale(Family::gaussian, 100, 50, {1.11, 1.09, 1.04, 1.04});
  if (preset == "table6_loc") return location(Family::student_t20, 50, 50, {0.8, 1.2, 1.9, 2.5});
  if (preset == "table6_scale") return scale(Family::student_t20, 50, 50, {1.15, 1.13, 1.08, 1.08});
  if (preset == "table7_loc") return location(Family::chisq3, 50, 50, {2.05, 2.90, 5.36, 7.90});
  if (preset == "table7_scale") return scale(Family::chisq3, 50, 50, {1.12, 1.11, 1.06, 1.06});
  if (preset == "null_sizes") {
    std::vector<ScenarioSpec> out;
    for (Family f : {Family::gaussian, Family::chisq3})
      for (std::size_t d : dims) out.push_back({f, d, 50, 50, 0.0, 1.0, CovarianceKind::ar04});
    return out;
  }
  throw ParameterError("unknown scenario preset '" + preset + "'");
}

}  // namespace kergpk

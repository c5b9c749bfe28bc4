#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kergpk/kernel.hpp"

namespace kergpk {

/// Mean kernel values within X (alpha), within Y (beta) and across (gamma).
/// Diagonal entries are excluded from alpha and beta.
struct PairSums {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Evaluates PairSums for arbitrary labelings of one kernel matrix.
///
/// Every caller (observed statistic, random permutations, exhaustive
/// enumeration) goes through `evaluate`, so a given labeling always yields
/// bit-identical sums regardless of which path produced it.
class LabelSumEvaluator {
 public:
  explicit LabelSumEvaluator(const KernelMatrix& kernel)
      : kernel_(&kernel), full_row_sums_(kernel.size(), 0.0), mask_(kernel.size(), 0.0) {
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      double s = 0.0;
      for (double v : kernel.row(i)) s += v;
      full_row_sums_[i] = s;
    }
  }

  std::size_t size() const noexcept { return full_row_sums_.size(); }

  /// `x_indices` lists the m observations assigned to sample X.
  PairSums evaluate(std::span<const std::size_t> x_indices) {
    const std::size_t n_total = size();
    const std::size_t m = x_indices.size();
    const std::size_t n = n_total - m;
    std::fill(mask_.begin(), mask_.end(), 0.0);
    for (std::size_t i : x_indices) mask_[i] = 1.0;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n_total; ++i) {
      auto row = kernel_->row(i);
      double t = 0.0;
      for (std::size_t j = 0; j < n_total; ++j) t += row[j] * mask_[j];
      if (mask_[i] != 0.0) {
        sxx += t - row[i];
      } else {
        sxy += t;
        syy += full_row_sums_[i] - t - row[i];
      }
    }
    return {sxx / (double(m) * double(m - 1)), syy / (double(n) * double(n - 1)),
            sxy / (double(m) * double(n))};
  }

  PairSums evaluate(std::span<const unsigned char> labels) {
    scratch_.clear();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == 0) scratch_.push_back(i);
    return evaluate(std::span<const std::size_t>(scratch_));
  }

 private:
  const KernelMatrix* kernel_;
  std::vector<double> full_row_sums_;
  std::vector<double> mask_;
  std::vector<std::size_t> scratch_;
};

}  // namespace kergpk

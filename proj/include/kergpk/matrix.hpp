#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kergpk/error.hpp"

namespace kergpk {

/// Dense row-major square matrix of doubles.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    assert(i < n_ && j < n_);
    return data_[i * n_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    assert(i < n_ && j < n_);
    return data_[i * n_ + j];
  }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * n_, n_};
  }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * n_, n_}; }

  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Observations stored row-major: one row per observation, `dim` coordinates each.
class ObservationSet {
 public:
  ObservationSet() = default;

  /// Throws DataError when the shape is inconsistent or a value is not finite.
  ObservationSet(std::size_t rows, std::size_t dim, std::vector<double> values)
      : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (rows_ < 1 || dim_ < 1) throw DataError("observation set needs at least one row and one column");
    if (values_.size() != rows_ * dim_) throw DataError("observation values do not match rows x dim");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw DataError("non-finite value at observation " + std::to_string(k / dim_) +
                        ", coordinate " + std::to_string(k % dim_));
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Stacks X on top of Y. Dimensions must agree.
inline ObservationSet pool(const ObservationSet& x, const ObservationSet& y) {
  if (x.dim() != y.dim()) {
    throw DataError("dimension mismatch: X has " + std::to_string(x.dim()) + " columns, Y has " +
                    std::to_string(y.dim()));
  }
  std::vector<double> v;
  v.reserve(x.values().size() + y.values().size());
  v.insert(v.end(), x.values().begin(), x.values().end());
  v.insert(v.end(), y.values().begin(), y.values().end());
  return ObservationSet(x.rows() + y.rows(), x.dim(), std::move(v));
}

/// Pooled-sample bookkeeping. labels[i] == 0 marks sample X, 1 marks sample Y.
class SampleLayout {
 public:
  SampleLayout() = default;

  /// First m pooled observations belong to X, the remaining n to Y.
  SampleLayout(std::size_t m, std::size_t n) : m_(m), n_(n), labels_(m + n, 0) {
    validate_sizes();
    for (std::size_t i = m; i < m + n; ++i) labels_[i] = 1;
  }

  explicit SampleLayout(std::vector<unsigned char> labels) : labels_(std::move(labels)) {
    for (auto g : labels_) {
      if (g > 1) throw ParameterError("group labels must be 0 or 1");
      (g == 0 ? m_ : n_) += 1;
    }
    validate_sizes();
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t total() const noexcept { return m_ + n_; }
  std::span<const unsigned char> labels() const noexcept { return labels_; }
  bool in_x(std::size_t i) const noexcept { return labels_[i] == 0; }

 private:
  void validate_sizes() const {
    if (m_ < 2 || n_ < 2) {
      throw SizeError("both samples need at least 2 observations (m=" + std::to_string(m_) +
                      ", n=" + std::to_string(n_) + ")");
    }
  }

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::vector<unsigned char> labels_;
};

}  // namespace kergpk

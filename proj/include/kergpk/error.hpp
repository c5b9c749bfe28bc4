#pragma once

#include <stdexcept>
#include <string>

namespace kergpk {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data (bad CSV cell, NaN, asymmetric kernel).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter value (non-positive bandwidth, level outside (0,1), ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Sample sizes too small for the requested computation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// The permutation covariance is singular, so GPK / Z statistics are undefined.
/// `corner_case()` names the kernel corner case ("C1", "C2") when known.
class DegenerateError : public Error {
 public:
  DegenerateError(const std::string& what, std::string corner_case = {})
      : Error(what), corner_case_(std::move(corner_case)) {}
  const std::string& corner_case() const noexcept { return corner_case_; }

 private:
  std::string corner_case_;
};

/// Floating-point breakdown beyond tolerated cancellation (large negative variance).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would exceed the configured cap.
class EnumerationCapError : public Error {
 public:
  using Error::Error;
};

}  // namespace kergpk

#pragma once

#include <stdexcept>
#include <string>

namespace robust_erm {

/// Invalid construction parameters or experiment settings.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or non-finite input data.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, long line = -1)
      : std::runtime_error(what), line_(line) {}
  /// 1-based input line, or -1 when not tied to a file.
  long line() const { return line_; }

 private:
  long line_;
};

/// Root-finding, optimization or quadrature failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every block weight rho'' vanished, so the implicit gradient of the proxy
/// is undefined at this parameter.
class DegenerateWeightsError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Covariance specification that is not positive semidefinite.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace robust_erm

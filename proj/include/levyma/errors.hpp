#pragma once

#include <stdexcept>
#include <string>

namespace levyma {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid parameters or configuration (bad driver/kernel parameters, m < 1, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// A numerical precondition of an asymptotic result does not hold for the
/// requested kernel (e.g. the lattice absolute sum is not square integrable).
class ConditionViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "condition"; }
};

/// Adaptive quadrature could not reach the requested tolerance within budget.
class QuadratureError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "quadrature"; }
};

/// A lattice series has no usable tail envelope or needs more terms than allowed.
class ConvergenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "convergence"; }
};

/// Estimator evaluated outside its domain or on a degenerate series.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace levyma

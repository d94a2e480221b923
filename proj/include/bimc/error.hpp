#pragma once

#include <stdexcept>
#include <string>

namespace bimc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatch, invalid interval, bad covariance.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Truncated-normal mass too small to represent in double precision.
class TailOverflow : public Error {
 public:
  using Error::Error;
};

/// A forward model could not be evaluated (domain violation, solver breakdown,
/// non-finite state).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Optimizer or linear-solver failure while building the IS density.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Configuration file problem; `field()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bimc

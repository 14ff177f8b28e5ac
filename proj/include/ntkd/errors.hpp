#pragma once

#include <stdexcept>
#include <string>

namespace ntkd {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Cholesky failed even after jitter escalation.
class SingularKernelError : public Error {
 public:
  SingularKernelError(const std::string& what, double eigen_scale, double last_jitter)
      : Error(what), eigen_scale_(eigen_scale), last_jitter_(last_jitter) {}
  double eigen_scale() const noexcept { return eigen_scale_; }
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double eigen_scale_;
  double last_jitter_;
};

class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

// Effective logit does not exist as a finite number (pure hard labels).
class UnboundedSolutionError : public Error {
 public:
  UnboundedSolutionError(const std::string& what, double saturated_value)
      : Error(what), saturated_value_(saturated_value) {}
  double saturated_value() const noexcept { return saturated_value_; }

 private:
  double saturated_value_;
};

// NaN losses, overflow, non-convergence that cannot be flagged instead.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ntkd

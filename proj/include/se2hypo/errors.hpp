#pragma once

#include <stdexcept>
#include <string>

namespace se2hypo {

/// Bad caller-supplied input (non-finite coordinates, malformed tables, violated preconditions).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, overflow, failed fits. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadrature box too small for the Gibbs weight: boundary weight is not negligible.
class BoxTooSmallError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Regression fit rejected: too few points, nonpositive data or poor fit quality.
class FitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Operation not available for the given potential kind (symbolic mode needs quadratic Φ).
class UnsupportedModeError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace se2hypo

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vhsim {

/// Base class of every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or call arguments (dimension mismatch, bad index, broken invariant).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite numbers reached a computation that requires finite input.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular (or too close to it).
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Scenario or chain file does not match the schema; `path` names the offending field.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// The passivity counterexample could not be constructed from the given seed.
class ConstructionFailed : public Error {
 public:
  using Error::Error;
};

/// Projected Gauss-Seidel did not reach the requested tolerance.
class LcpNonConvergence : public Error {
 public:
  LcpNonConvergence(const std::string& message, double best_residual)
      : Error(message), best_residual_(best_residual) {}

  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// A simulation step failed; wraps the module error with the step index.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& message)
      : Error("step " + std::to_string(step) + ": " + message), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace vhsim

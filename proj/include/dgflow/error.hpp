#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dgflow {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Degenerate or inconsistent mesh geometry/topology.
class InvalidMesh : public Error {
 public:
  using Error::Error;
};

/// A request outside of what an implementation supports (e.g. quadrature order).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Pure-Neumann flow problem without a pressure gauge.
class GaugeRequired : public Error {
 public:
  using Error::Error;
};

/// Structural singularity or breakdown inside a linear solver.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Iteration cap reached; carries the best iterate found.
class NonConvergence : public SolverFailure {
 public:
  NonConvergence(const std::string& what, std::vector<double> best, double residual)
      : SolverFailure(what), best_iterate_(std::move(best)), residual_(residual) {}
  const std::vector<double>& best_iterate() const noexcept { return best_iterate_; }
  double relative_residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_iterate_;
  double residual_;
};

class TracingFailure : public Error {
 public:
  using Error::Error;
};

class IterationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace dgflow

#pragma once

#include <stdexcept>
#include <string>

namespace ermasym {

// Root of every failure the library reports. Each subclass corresponds to one
// documented failure mode; callers that only need a message can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class QuadratureNonConvergence : public Error {
 public:
  using Error::Error;
};

class NonFiniteIntegrand : public Error {
 public:
  using Error::Error;
};

class ProxNonConvergence : public Error {
 public:
  using Error::Error;
};

class NotTwiceDifferentiable : public Error {
 public:
  using Error::Error;
};

class DensityNotDifferentiable : public Error {
 public:
  using Error::Error;
};

class SigmaTooSmall : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class MeanNotPositive : public Error {
 public:
  using Error::Error;
};

// Saddle-point solver failures share a base so the CLI can map them to one
// exit code.
class SolverError : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public SolverError {
 public:
  using SolverError::SolverError;
};

class DivergingIterates : public SolverError {
 public:
  using SolverError::SolverError;
};

// The loss has a vanishing right tail and delta is at or below the
// separability threshold, so the ERM minimizer set is unbounded.
class SeparableRegime : public SolverError {
 public:
  using SolverError::SolverError;
};

class AchievabilityFailed : public Error {
 public:
  using Error::Error;
};

class OptimizerDiverged : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace ermasym

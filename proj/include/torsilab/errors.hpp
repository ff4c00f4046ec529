#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace torsilab {

// Base of every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point outside the chart domain of a metric, or a stencil leaving it.
struct DomainError : Error {
  using Error::Error;
};

// Caller passed incompatible arguments (wrong group tag, dimension mismatch).
struct UsageError : Error {
  using Error::Error;
};

// Time outside the certified horizon of a flow or envelope.
struct RangeError : Error {
  using Error::Error;
};

// Quadrature did not reach its tolerance.
struct NumericError : Error {
  using Error::Error;
};

// Trial function with zero Dirichlet energy.
struct DegenerateTrialError : Error {
  using Error::Error;
};

// Vector field whose weak divergence is not -1 within tolerance.
struct InvalidFieldError : Error {
  using Error::Error;
};

// Upper bound requested for a path without spatially constant trace.
struct UncertifiedBoundError : Error {
  using Error::Error;
};

struct UnsupportedKindError : Error {
  using Error::Error;
};

// A flow coefficient hit zero during integration; the crossing lies in
// [t_lo, t_hi].
struct BlowupError : Error {
  BlowupError(const std::string& what, double lo, double hi)
      : Error(what), t_lo(lo), t_hi(hi) {}
  double t_lo;
  double t_hi;
};

// Conjugate gradient hit its iteration cap.
struct SolverError : Error {
  SolverError(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

// Invalid experiment configuration; `pointer` is a JSON pointer to the
// offending value.
struct ConfigError : Error {
  ConfigError(std::string ptr, const std::string& what)
      : Error(ptr + ": " + what), pointer(std::move(ptr)) {}
  std::string pointer;
};

}  // namespace torsilab

#pragma once

#include <stdexcept>
#include <string>

namespace cohsrc {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a physical formula (U <= 0, v = 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configuration or geometry violates one of its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A caller-side precondition does not hold (start point inside an electrode, too few events).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, long iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

/// A least-squares fit failed; carries the best cost reached.
class FitError : public Error {
 public:
  FitError(const std::string& what, double best_cost) : Error(what), best_cost_(best_cost) {}
  double best_cost() const noexcept { return best_cost_; }

 private:
  double best_cost_;
};

/// No candidate dephasing frequency explains the temporal correlation signal.
class FrequencySearchError : public Error {
 public:
  using Error::Error;
};

/// Raised when a quantity is requested from an object that cannot provide it.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace cohsrc

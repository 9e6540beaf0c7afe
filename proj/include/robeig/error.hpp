#pragma once

#include <stdexcept>
#include <string>

namespace robeig {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite data, negative epsilon, zero vectors and similar bad arguments.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was skipped by the caller,
// e.g. Taylor K-matrix built from eigenvalues that were never clamped.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Layer used in a state it cannot serve (eval before any training step,
// backward with a foreign context).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  /// Off-diagonal Frobenius norm left when the sweep budget ran out.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class BreakdownError : public Error {
 public:
  using Error::Error;
};

}  // namespace robeig

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quasipot {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- numerics ---
class SingularMatrix : public Error {
 public:
  using Error::Error;
};
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// --- expressions ---
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};
class UnknownIdentifier : public ParseError {
 public:
  using ParseError::ParseError;
};
class DomainError : public Error {
 public:
  using Error::Error;
};

// --- matrix equations ---
class NonUniqueSolution : public Error {
 public:
  NonUniqueSolution(const std::string& message, int null_space_dim)
      : Error(message + " (null space dimension " + std::to_string(null_space_dim) + ")"),
        null_space_dim_(null_space_dim) {}
  int null_space_dim() const { return null_space_dim_; }

 private:
  int null_space_dim_;
};
class TraceZero : public Error {
 public:
  using Error::Error;
};
class ResonantSpectrum : public Error {
 public:
  using Error::Error;
};

// --- equilibrium analysis ---
class NotInvertible : public Error {
 public:
  using Error::Error;
};
class NotAttractor : public Error {
 public:
  using Error::Error;
};
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};
class ComplexBeta : public Error {
 public:
  using Error::Error;
};

// --- exit problem ---
class NotExitSaddle : public Error {
 public:
  using Error::Error;
};
class ComplexUnstableEigenvalue : public Error {
 public:
  using Error::Error;
};

// --- integration / simulation ---
class StepRejected : public Error {
 public:
  using Error::Error;
};
class Diverged : public Error {
 public:
  using Error::Error;
};

}  // namespace quasipot

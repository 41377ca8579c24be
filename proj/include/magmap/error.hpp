#pragma once

#include <stdexcept>
#include <string>

namespace magmap {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-positive or otherwise invalid hyperparameter / argument.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A training sample or waypoint lies outside the modelling domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Factorization failed even after jitter escalation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Timestamps went backwards in a time-ordered stream.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV, config or model file).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model file that cannot be read back (bad magic, version or payload).
class ModelFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

}  // namespace magmap

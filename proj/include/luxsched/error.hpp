#pragma once

#include <stdexcept>
#include <string>

namespace luxsched {

// Bad input: shapes, ranges, malformed files. The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidDecompositionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Two captures at the same light level carry no information about the light.
class DegeneratePairError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InstanceTooLargeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures of the numerics themselves (NaN costs, non-physical fits). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonPhysicalLightError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace luxsched

#pragma once

#include <stdexcept>
#include <string>

namespace stimtrain {

// Error categories. Anything deriving from ValidationError maps to CLI exit
// code 1; every other exception maps to exit code 2.

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MaskError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RuleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class LabelError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EnumerationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the training loop when the loss leaves the finite/bounded range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stimtrain

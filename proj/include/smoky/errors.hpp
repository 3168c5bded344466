#pragma once

#include <stdexcept>
#include <string>

namespace smoky {

/// Input violates a documented invariant (bad box, overlapping segments, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed record in an input file. The message names the line.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Index or frame number outside the admissible range.
class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Tensor or frame dimensions do not compose.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Inconsistent configuration detected at startup.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// File missing, unreadable or unwritable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smoky

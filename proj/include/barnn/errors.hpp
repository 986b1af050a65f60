#pragma once

#include <stdexcept>
#include <string>

namespace barnn {

/// Operand shapes do not conform.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (log of a
/// negative number, non-positive dropout rate, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A computation produced NaN/Inf where finite values were required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or mismatched file contents (checkpoints, datasets).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace barnn

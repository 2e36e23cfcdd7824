#pragma once

#include <stdexcept>
#include <string>

namespace svp {

// Operand shapes do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A theorem precondition (r > 1, 4 < theta <= 2 sqrt(n), ...) does not hold.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed matrix text, unreadable or unwritable files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative decomposition failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svp

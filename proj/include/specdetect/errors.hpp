#pragma once

#include <stdexcept>

namespace specdetect {

// Input violates a documented precondition (bad measure, out-of-range parameter, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative method failed to converge, or a linear system is numerically singular.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specdetect

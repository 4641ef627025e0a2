#pragma once

#include <stdexcept>
#include <string>

namespace rmsequiv {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Input data or configuration that violates a documented invariant.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Data that is well formed but statistically degenerate (e.g. sse = 0).
class DegenerateDataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An iterative numerical routine failed to converge or lost its bracket.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace rmsequiv

#pragma once

#include <stdexcept>
#include <string>

namespace ridgeci {

/// Raised when a computation is well-posed but numerically impossible at the
/// given inputs (eigen-gap collapse, empty candidate set, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// λ_r and λ_{r+1} fall inside one eigenvalue cluster.
class GapViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Invalid user-supplied configuration or input file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ridgeci

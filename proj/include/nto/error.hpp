#pragma once

#include <stdexcept>
#include <string>

namespace nto {

/// Invalid user-supplied configuration (bad dimensions, out-of-range constants, malformed files).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition (wrong tensor shapes, non-scalar loss root, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN/Inf, divergence, or a solver that failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nto

#pragma once

#include <stdexcept>
#include <string>

namespace cee {

/// Bad or inconsistent configuration (shapes, unknown ids, out-of-range knobs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse: calling an operation outside its precondition.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Mathematical domain violation (log of zero mass, unreachable state, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A structural invariant was broken (for example a mask with no available action).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical blow-up detected during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File and checkpoint failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cee

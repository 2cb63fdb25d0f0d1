#pragma once

#include <stdexcept>
#include <string>

namespace sslab {

/// Input outside the mathematical domain of an operation (t <= 0, divergent
/// moment, function outside the supported family, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation configuration whose expected population exceeds the cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sslab

#pragma once

#include <stdexcept>
#include <string>

namespace snnbench {

/// Malformed or schema-violating configuration input (network specs, sweep
/// configs, power logs, spike files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity is outside the domain of an operation (e.g. zero model time).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An index or time window lies outside the valid extent.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Requested sizes overflow the id space or a fixed-width field.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace snnbench

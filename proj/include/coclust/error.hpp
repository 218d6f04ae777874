#pragma once

#include <stdexcept>
#include <string>

namespace coclust {

/// Malformed input files, inconsistent records, invalid graph construction.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf, degenerate distributions, divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration (shape mismatch, unknown config key, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace coclust

#pragma once

#include <stdexcept>
#include <string>

namespace netmom {

/// Invalid configuration or out-of-range parameter supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (CSV content, prices, calendars).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too many graph-learning problems failed to reach their KKT tolerance.
class SolverBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netmom

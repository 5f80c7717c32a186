#pragma once

#include <stdexcept>

namespace attnshap {

// Thrown for malformed run configuration (unknown subcommand/method, missing
// or contradictory options). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for unreadable or schema-violating input files. Exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation produces or receives non-finite values. Exit 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace attnshap

#pragma once

#include <stdexcept>
#include <string>

namespace ghnet {

// Operand shapes that cannot be combined.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed graph input (bad edge index, non-square filter, ...).
struct GraphError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent model or experiment configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A dataset on disk failed validation. what() names the offending file.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ghnet

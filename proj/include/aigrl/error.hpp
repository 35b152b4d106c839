#pragma once

#include <stdexcept>
#include <string>

namespace aigrl {

// Invalid value passed by the caller (bad shape, bad index, bad count).
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input exceeds a hard size limit (sequence cap, PI cap, node cap).
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed textual input; line is 1-based.
struct ParseError : std::runtime_error {
  ParseError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
  int line;
};

// File schema or checkpoint version does not match what this build writes.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or inconsistent training state.
struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace aigrl

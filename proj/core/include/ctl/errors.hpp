#pragma once

#include <stdexcept>
#include <string>

namespace ctl {

// Shape or extent disagreement between operands, or between a checkpoint
// tensor and the model it is loaded into.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid or inconsistent run configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// NaN/Inf produced during a forward or backward pass.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed, truncated or mismatched binary file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ctl

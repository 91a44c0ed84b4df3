#pragma once

#include <stdexcept>
#include <string>

namespace pwg {

// Thrown for malformed or missing external data: files, corpora, checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation leaves the finite-float domain (NaN/Inf losses,
// non-finite gradients, degenerate norms).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for invalid configuration values or unknown keys.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pwg

#pragma once

#include <stdexcept>
#include <string>

namespace stepdad {

/// Shape or width mismatch between tensors, layers or model inputs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value, unknown key or malformed config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, impossible histories, divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outcome outside the model's support.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Filesystem and serialization failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stepdad

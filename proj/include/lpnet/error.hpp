#pragma once

#include <stdexcept>
#include <string>

namespace lpnet {

// Error categories map onto the CLI exit codes: usage/config (2), data (3),
// numeric (4).

/// Invalid argument domain, e.g. a non-positive ILT time.
class DomainError : public std::domain_error {
public:
  DomainError(const std::string& what, long index = -1)
      : std::domain_error(index >= 0 ? what + " (index " + std::to_string(index) + ")" : what),
        index_(index) {}
  long index() const noexcept { return index_; }

private:
  long index_;
};

/// Shape or dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value or unknown enum name.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (files, CSV rows, manifests).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, blow-up during integration, diverging training.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace lpnet

#pragma once

#include <stdexcept>
#include <string>

namespace qclp {

// Bad input or configuration: maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Network-layer failure after retries are exhausted.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cache miss while running in fixtures-only mode.
class FixtureMissingError : public TransportError {
 public:
  using TransportError::TransportError;
};

}  // namespace qclp

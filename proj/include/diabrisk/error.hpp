#pragma once

#include <stdexcept>
#include <string>

namespace diabrisk {

/// Bad input: schema mismatch, out-of-range value, precondition violated.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable, truncated or otherwise not writable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric degeneracy (singular system, zero variance, empty class).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diabrisk

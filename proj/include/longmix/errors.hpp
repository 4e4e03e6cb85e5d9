#pragma once

#include <stdexcept>
#include <string>

namespace longmix {

// Bad inputs: malformed data files, inconsistent model configuration,
// out-of-range options.  Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure that survived the built-in recovery attempts
// (e.g. a covariance matrix that stays indefinite after jitter).
// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace longmix

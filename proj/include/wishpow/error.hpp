#pragma once

#include <stdexcept>
#include <string>

namespace wishpow {

/// Bad sizes, out-of-range parameters, malformed law strings.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values produced by sampling or entrywise powers.
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Eigensolver did not converge within its iteration cap.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A deterministic invariant check was violated.
class InvariantFailure : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace wishpow

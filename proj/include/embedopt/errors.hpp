#pragma once

#include <stdexcept>
#include <string>

namespace embedopt {

// Precondition or shape violation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DivisionByZero : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Rendered or target map with zero variance cannot be normalized.
class DegenerateMap : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A finite-difference oracle saw a non-finite function value.
class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace embedopt

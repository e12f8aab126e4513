#pragma once

#include <stdexcept>

namespace relucraft {

// Bad arguments: dimension mismatches, out-of-range configuration values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data violates a structural assumption of a construction
// (e.g. a block polynomial leaving [-1/2, 1/2]).
class SpecViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during training or numerical differentiation.
class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relucraft

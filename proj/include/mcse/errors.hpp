// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mcse {

// Bad arguments or malformed data supplied by the caller.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A linear solve hit a numerically singular or indefinite system.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A relative transfer function could not be normalized (reference channel
// response below the numerical floor).
class SingularRtfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistical estimate could not be formed from the given data.
class EstimationFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Randomized scene construction exhausted its retry budget.
class GenerationFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File I/O or format failure; the message names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcse

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mpogpt {

/// Extent or axis mismatch in a tensor operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mathematically undefined request (e.g. relative error against a zero reference).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// API misuse: mixing tapes, non-scalar loss, bad arguments to a command.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad user-provided data: corpus, token ids, prompts, config values.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mpogpt

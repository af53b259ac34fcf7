#pragma once

#include <stdexcept>
#include <string>

namespace dus {

/// Precondition violated by the caller (shape mismatch, bad channel count, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values or a solver breakdown.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated DMRT / DUSC file, or a file that cannot be opened.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested operation is not available in the configured mode.
class UnsupportedMode : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dus

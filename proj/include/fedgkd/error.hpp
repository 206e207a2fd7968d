#pragma once

#include <stdexcept>
#include <string>

namespace fedgkd {

/// Raised on malformed input: bad files, inconsistent shapes, violated
/// preconditions on user-supplied values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical computation goes non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedgkd

#pragma once

#include <stdexcept>
#include <string>

namespace sciflow {

// Input violates a schema, an invariant or a precondition. Maps to CLI exit 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written. Maps to CLI exit 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sciflow

#pragma once

#include <stdexcept>
#include <string>

namespace imbppo {

// Bad user input: missing files, malformed configs, dimension mismatches.
// The CLI maps this to exit code 2; anything else thrown maps to 1.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

// Numerical failure inside training (non-finite loss or gradient).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

}  // namespace imbppo

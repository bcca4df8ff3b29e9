#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

// Bad user input: malformed files, dimension mismatches, out-of-range flags.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerically degenerate problem instance: vanishing sensitivity, accuracy at
// 0 or 1, collapsed loss gap. The CLI maps this to exit code 2.
class DegeneracyError : public std::runtime_error {
 public:
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wdro

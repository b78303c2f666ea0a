#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tpeq {

// Raised when an exhaustive search or exact solver would exceed its size guard.
class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed file content. line() is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Report inputs that do not describe the same workload.
class HashMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tpeq

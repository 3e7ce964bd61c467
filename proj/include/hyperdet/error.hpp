#pragma once

#include <stdexcept>
#include <string>

namespace hyperdet {

// Base class for every error raised by the library. The CLI maps each
// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: malformed config values, bad variant names, etc.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Shape mismatch or contract violation between numeric objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, eigensolver failure and similar numeric breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperdet

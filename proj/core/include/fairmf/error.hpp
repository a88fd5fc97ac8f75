#pragma once

#include <stdexcept>
#include <string>

namespace fairmf {

// Base of every error the library throws. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: config out of range, inconsistent data, precondition violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. Carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, long line = 0)
      : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Non-finite values or divergence during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairmf

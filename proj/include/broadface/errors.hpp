#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace broadface {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(actual)) {}
};

class NearZeroNorm : public Error {
 public:
  using Error::Error;
};

/// Raised when a queued identity-representative snapshot has collapsed to zero.
class NearZeroSnapshotNorm : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based; 0 means the whole file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace broadface

#pragma once

#include <stdexcept>
#include <string>

namespace tgl {

/// Base of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed COO text or report document.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Dimensions of two operands do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined on the given data (empty set, zero denominator).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure while reading input or writing a report.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tgl

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbsolve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pivot fell below the guard threshold during elimination.
class SingularPivot : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised by a communicator when delivery cannot complete (deadlock, aborted world).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Raised when ranks disagree on the collective protocol (e.g. barrier labels).
class ProtocolError : public TransportError {
 public:
  using TransportError::TransportError;
};

class NonPhysicalState : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cbsolve

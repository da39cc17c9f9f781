#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cropnet {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by caller-supplied data (too few samples, bad range...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Incompatible array shapes handed to a kernel.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value met during a forward or training pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Model variant asked to run without one of its modalities.
class ModalityError : public Error {
 public:
  using Error::Error;
};

// Malformed text file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), message_(what), line_(line) {}

  std::size_t line() const noexcept { return line_; }
  // The message without the line suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

}  // namespace cropnet

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmhs {

// Base of every error raised by the toolkit. The CLI maps the concrete
// subclass to a process exit code via exit_code().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedCodecError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TooShortError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CorruptionError : public FormatError {
 public:
  CorruptionError(const std::string& what, std::size_t byte_offset)
      : FormatError(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace mmhs

#pragma once

#include <stdexcept>
#include <string>

namespace salt {

// Input data is malformed or inconsistent. The CLI maps this family to exit 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFiniteError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DimensionOverflowError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DuplicateTokenError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Programmer-facing contract violations (shape mismatch, bad config values).
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// Bad command-line usage. The CLI maps this to exit 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace salt

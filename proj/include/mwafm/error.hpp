#pragma once

#include <stdexcept>
#include <string>

namespace mwafm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value left the finite range (NaN or Inf).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: configuration, arguments, mismatched artifacts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { bad_magic, version_mismatch, truncated, non_finite, malformed };

/// A binary container was readable but its contents are invalid.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace mwafm

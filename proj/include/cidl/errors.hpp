#pragma once

#include <stdexcept>
#include <string>

namespace cidl {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter values, negative entries, non-finite samples.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Operands whose shapes do not agree.
class DimensionError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Filesystem and file-format failures.
class IoError : public Error {
public:
  using Error::Error;
};

class TensorFormatError : public IoError {
public:
  using IoError::IoError;
};

class BadMagicError : public TensorFormatError {
public:
  using TensorFormatError::TensorFormatError;
};

class UnsupportedVersionError : public TensorFormatError {
public:
  using TensorFormatError::TensorFormatError;
};

class TruncatedPayloadError : public TensorFormatError {
public:
  using TensorFormatError::TensorFormatError;
};

class DtypeError : public TensorFormatError {
public:
  using TensorFormatError::TensorFormatError;
};

} // namespace cidl

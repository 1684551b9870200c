#pragma once

#include <stdexcept>
#include <string>

namespace dsclap {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a precondition (bad argument, bad configuration).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file or record does not match the expected on-disk format,
/// or its contents are inconsistent with the requested operation.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or received a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsclap

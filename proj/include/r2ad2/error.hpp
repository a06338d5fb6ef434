#pragma once

#include <stdexcept>
#include <string>

namespace r2ad2 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, dimensions or declarative settings that cannot work together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A call made in the wrong order or with arguments violating its contract.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace r2ad2

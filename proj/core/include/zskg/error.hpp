#pragma once

#include <stdexcept>
#include <string>

namespace zskg {

// Exception hierarchy. The CLI maps each class onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or unknown configuration keys/values (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, inconsistent or missing input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a diverging objective (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace zskg

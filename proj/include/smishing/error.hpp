#pragma once

#include <stdexcept>
#include <string>

namespace smishing {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, missing or unusable input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// A persisted model bundle failed validation.
class BundleError : public DataError {
 public:
  using DataError::DataError;
};

// Optimisation diverged or a model could not be fit (exit code 4).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace smishing

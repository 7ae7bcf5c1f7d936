#pragma once

#include <stdexcept>
#include <string>

namespace dem {

// Error hierarchy shared by the library and the CLI. Each class carries the
// process exit code the CLI maps it to.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

// Invalid configuration (bad hyper-parameter, malformed config file, ...).
class ConfigError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

// Problems with user-supplied data (schema violations, shape mismatches,
// values outside the admissible treatment set).
class DataError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class ShapeError : public DataError {
public:
  using DataError::DataError;
};

class DomainError : public DataError {
public:
  using DataError::DataError;
};

class SizeError : public DataError {
public:
  using DataError::DataError;
};

// Numerical optimization failures (divergence, non-finite gradients).
class OptimError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

// No feasible assignment under the budget.
class InfeasibleError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 5; }
};

// Filesystem problems.
class IoError : public Error {
public:
  using Error::Error;
  int exit_code() const override { return 6; }
};

// Operation called out of order (e.g. backward without a forward pass).
class StateError : public Error {
public:
  using Error::Error;
};

}  // namespace dem

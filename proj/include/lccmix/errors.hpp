#pragma once

#include <stdexcept>
#include <string>

namespace lccmix {

// Error hierarchy. The CLI maps each branch onto an exit code:
// InputError -> 2, NumericError -> 3, ConfigError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

// All observations identical: the scatter matrix is zero and no bound can be
// derived from the data.
class DegenerateDataError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace lccmix

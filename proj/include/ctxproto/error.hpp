#pragma once

#include <stdexcept>
#include <string>

namespace ctxproto {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 1, DataError -> 2, NumericError -> 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not agree.
class DimensionError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Input is well-shaped but mathematically degenerate (e.g. an empty softmax row).
class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IncompatibleCheckpointError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace ctxproto

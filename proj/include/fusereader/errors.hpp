#pragma once

#include <stdexcept>
#include <string>

namespace fusereader {

// Failure classes callers are expected to tell apart: the CLI maps them to
// exit codes and tests assert on the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/rank disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument value outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A caller-side contract violation (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Out-of-range index or unknown id.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid run/training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or record.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf surfaced by the finiteness contract.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fusereader

#pragma once

#include <stdexcept>
#include <string>

namespace iccn {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A documented precondition of an operation was violated by the caller
// (shape mismatch, asymmetric input, invalid argument range, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// An iterative numerical kernel failed to converge or produced non-finite
// values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be (strictly) positive definite is singular at the
// requested ridge. The message names the offending eigenvalue.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Input too small or empty for the operation (fewer than two samples,
// zero-length sequence, sequence shorter than a kernel, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A minibatch is too small for a well-posed correlation objective.
class MinibatchError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

// Invalid static configuration (unknown variant, spatial collapse of a
// conv stack, empty grid, ...). Raised at build time, not mid-run.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed data: labels out of range, bad splits, inconsistent dims.
class DataError : public Error {
 public:
  using Error::Error;
};

// Unreadable or corrupt file. The message carries the record id and byte
// offset where parsing stopped.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Metric evaluation impossible (e.g. zero usable pairs after exclusion).
class EvalError : public Error {
 public:
  using Error::Error;
};

// Training aborted (non-finite loss or gradient). The message carries the
// parameter name or epoch/batch index.
class TrainError : public Error {
 public:
  using Error::Error;
};

}  // namespace iccn

#pragma once

#include <stdexcept>
#include <string>

namespace pnfrec {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension contract violations.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-range indices (embedding lookups, CE targets).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Data-level problems: empty inputs, empty filter results, bad splits,
// checkpoint mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (diverged training).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Inference preconditions (empty positive history, empty candidate set).
class InferenceError : public Error {
 public:
  using Error::Error;
};

// Evaluation preconditions (no users to evaluate).
class EvalError : public Error {
 public:
  using Error::Error;
};

// Filesystem trouble.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnfrec

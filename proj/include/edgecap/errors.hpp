#pragma once

#include <stdexcept>
#include <string>

namespace edgecap {

// Base class for all library errors. Subclasses partition failures by kind so
// callers can catch what they can actually handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed external input (file headers, payloads, schemas).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value (out-of-range scalar, bad threshold ordering, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between tensors/vectors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Token or element index out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset-level problems (empty split, over-long caption, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/archive serialization failures (bad magic, truncation, shape
// mismatch against the target config).
class PersistenceError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken (non-finite values, stale caches). Indicates a
// bug in the caller or the library, never bad user input.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace edgecap

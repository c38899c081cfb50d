#pragma once

#include <stdexcept>
#include <string>

namespace relcomp {

// Base class for all errors raised by the library. The CLI maps subclasses
// to exit codes, so new error kinds should derive from one of these.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input that never made it into the system: bad annotation JSON,
// CSV syntax errors, unparsable queries.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a constraint: unknown tables,
// duplicate primary keys, cyclic merge requests, inadmissible plans.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failures while fitting models (degenerate data, no trainable variables).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Failures while executing a plan or query over data.
class ExecutionError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated artifacts on disk.
class SerializationError : public Error {
 public:
  using Error::Error;
};

// Artifact written by an incompatible version (bad magic, version, or
// encoder fingerprint mismatch).
class VersionMismatchError : public SerializationError {
 public:
  using SerializationError::SerializationError;
};

}  // namespace relcomp

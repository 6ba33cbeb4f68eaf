#pragma once

#include <stdexcept>
#include <string>

namespace poar {

/// Base for all errors raised by the library. `kind()` is a short stable tag
/// used by the command-line tool when printing machine-parsable errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept = 0;
};

/// Invalid or inconsistent configuration (unknown keys, invariant violations,
/// shape mismatches between components).
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// An API was called in a state where the call is not allowed.
class UsageError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage"; }
};

/// Input data is degenerate for the requested computation.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate-input"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace poar

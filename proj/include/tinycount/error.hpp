#pragma once

#include <stdexcept>
#include <string>

namespace tinycount {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values: out-of-range tokens, empty inputs, non-finite data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Model configuration or parameter shapes that do not agree.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A construction or sampler specification violates its preconditions.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// Frame vectors that are not unit norm or have the wrong shape.
class InvalidFrame : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (no bracket, non-finite loss, ...).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace tinycount

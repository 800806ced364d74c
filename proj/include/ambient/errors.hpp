#pragma once

#include <stdexcept>
#include <string>

namespace ambient {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad parameters, impossible geometry, schema violations.
struct ConfigError : Error {
  using Error::Error;
};

// Mismatched vector/matrix shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Singular solves, non-finite values, diverged training.
struct NumericalError : Error {
  using Error::Error;
};

// API misuse (missing caches, wrong call order).
struct UsageError : Error {
  using Error::Error;
};

// File format and filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ambient

#pragma once

#include <stdexcept>
#include <string>

namespace sta {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or widths at an op boundary.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Invalid static configuration (patch sizes, head counts, zone counts, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Bad runtime input: malformed files, out-of-range values, duplicate ids.
class ValidationError : public Error {
public:
  using Error::Error;
};

// API misuse, e.g. backward on a non-scalar loss.
class ContractError : public Error {
public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
public:
  using Error::Error;
};

// Process exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

}  // namespace sta

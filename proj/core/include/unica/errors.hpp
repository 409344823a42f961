#pragma once

#include <stdexcept>
#include <string>

namespace unica {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so each class corresponds to one failure category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Caller violated an interface contract (wrong widths, missing context, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent data.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite value where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Training diverged or could not proceed.
class TrainingError : public NumericError {
public:
    using NumericError::NumericError;
};

// Artifacts that do not belong together (e.g. adapter vs. backbone hash).
class CompatibilityError : public Error {
public:
    using Error::Error;
};

}  // namespace unica

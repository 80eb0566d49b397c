#pragma once

#include <stdexcept>
#include <string>

namespace grbert {

// Base class for all library errors. Subclasses distinguish configuration
// mistakes (exit code 2 in the CLI) from runtime failures (exit code 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad option values, unknown keys, invalid rate vectors.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input files; carries the offending line number in the message.
class ParseError : public Error {
public:
    using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// API misuse: shape mismatches, wrong mode, missing loss components.
class ContractError : public Error {
public:
    using Error::Error;
};

// Mathematically degenerate input (zero-norm vector, constant rank data).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Filesystem and serialization failures.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace grbert

#pragma once

#include <stdexcept>
#include <string>

namespace bc {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text or file contents (CSV, WAV header, JSON).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates a documented invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Bad run configuration: missing models, impossible parameter combos.
struct ConfigError : Error {
    using Error::Error;
};

// Dataset problems: missing coverage, empty positive set.
struct DataError : Error {
    using Error::Error;
};

// Filesystem and OS level failures.
struct IoError : Error {
    using Error::Error;
};

} // namespace bc

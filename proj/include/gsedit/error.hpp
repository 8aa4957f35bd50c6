#pragma once

#include <stdexcept>
#include <string>

namespace gsedit {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad arguments, shape mismatches, malformed files or configs.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A file or config that could not be parsed.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// An edit oracle or embedding provider failed to answer. Callers may retry.
class OracleError : public Error {
public:
    using Error::Error;
};

} // namespace gsedit

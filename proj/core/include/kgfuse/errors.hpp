#pragma once

#include <stdexcept>
#include <string>

namespace kgfuse {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, malformed data, or a violated precondition.
/// Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch between tensors or embeddings.
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Malformed input file; message is prefixed with the offending line number.
class ParseError : public ValidationError {
public:
    ParseError(int line, const std::string& msg)
        : ValidationError("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Filesystem failure. Maps to CLI exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a failed numeric check. Maps to CLI exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace kgfuse

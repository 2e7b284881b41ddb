#pragma once

#include <stdexcept>
#include <string>

namespace uxmc {

// Every error raised by the library derives from Error. The CLI maps the
// concrete category onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A structural invariant of a data structure was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (text or binary).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Text parse failure, carries the offending line.
class ParseError : public FormatError {
public:
    ParseError(const std::string& what, std::size_t line)
        : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// NaN/Inf encountered where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace uxmc

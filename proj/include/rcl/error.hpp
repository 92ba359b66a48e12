#pragma once

#include <stdexcept>
#include <string>

namespace rcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent network description (dimensions, head placement, ...).
class SpecError : public Error {
public:
    using Error::Error;
};

/// Tensor or parameter shapes that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced by an engine operation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Bad configuration value or key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Precondition violated by an argument (range, emptiness, size).
class ArgumentError : public Error {
public:
    using Error::Error;
};

}  // namespace rcl

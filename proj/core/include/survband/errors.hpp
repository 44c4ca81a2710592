#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace survband {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// A required column is missing from a delimited file.
class SchemaError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

    // 0-based data row (the header is not counted).
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// Parsed values that break a data invariant (negative time, event not in {0,1}, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class DegenerateFeatureError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration (e.g. a validation set without events).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace survband

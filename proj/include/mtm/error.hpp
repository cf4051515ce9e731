#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtm {

// Base for every error the library throws. `kind()` is a stable short tag the
// CLI puts in its machine-readable error JSON.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual auto kind() const noexcept -> const char* { return "error"; }
};

// Caller supplied something outside an operation's domain (kappa out of
// range, unknown target, malformed option).
class InvalidArgument : public Error {
public:
    using Error::Error;
    auto kind() const noexcept -> const char* override { return "invalid_argument"; }
};

class SchemaError : public Error {
public:
    using Error::Error;
    auto kind() const noexcept -> const char* override { return "schema_error"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t row)
        : Error(message + " (row " + std::to_string(row) + ")")
        , row_(row)
    {
    }

    // 1-based data row (header excluded).
    auto row() const noexcept -> std::size_t { return row_; }
    auto kind() const noexcept -> const char* override { return "parse_error"; }

private:
    std::size_t row_;
};

// Data is well-formed but unusable (empty design, zero variance, n < 2 ...).
class DataError : public Error {
public:
    using Error::Error;
    auto kind() const noexcept -> const char* override { return "data_error"; }
};

} // namespace mtm

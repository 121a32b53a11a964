#pragma once

#include <stdexcept>
#include <string>

namespace astgi {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's JSON error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& m) : Error("dimension_error", m) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& m) : Error("contract_error", m) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& m) : Error("validation_error", m) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& m)
        : Error("parse_error", "line " + std::to_string(line) + ": " + m), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyNeighborhoodError : public Error {
public:
    explicit EmptyNeighborhoodError(const std::string& m) : Error("empty_neighborhood", m) {}
};

class EmptyHistoryError : public Error {
public:
    explicit EmptyHistoryError(const std::string& m) : Error("empty_history", m) {}
};

class EmptyQueryError : public Error {
public:
    explicit EmptyQueryError(const std::string& m) : Error("empty_query", m) {}
};

class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& m) : Error("non_finite", m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("io_error", m) {}
};

}  // namespace astgi

#pragma once

#include <stdexcept>
#include <string>

namespace qhmm {

/// Base class for every error raised by the library. The category selects
/// the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Category { config = 2, data = 3, numeric = 4 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    Category category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

/// Malformed or invalid input data (CSV rows, non-positive prices, bad shapes).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Degenerate numerics: zero variance, non-finite values, failed root finding.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

} // namespace qhmm

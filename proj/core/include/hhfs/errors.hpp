#pragma once

#include <stdexcept>
#include <string>

namespace hhfs {

/// Bad configuration or malformed input. The CLI maps this family to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed row in an input file; carries the 1-based row number.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, long row)
        : ConfigError("row " + std::to_string(row) + ": " + what), row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

/// Numerical failure at runtime (non-finite intermediate, indefinite Hessian, ...).
/// The CLI maps this family to exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model fitting failed (no restart converged).
class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace hhfs

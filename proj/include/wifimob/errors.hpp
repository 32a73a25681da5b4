#pragma once

#include <stdexcept>
#include <string>

namespace wifimob {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or parameter values (CLI exit code 1).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed or contract-violating input data (CLI exit code 2).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

/// Numerical failure, e.g. a factorization that cannot be stabilized
/// (CLI exit code 3).
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace wifimob

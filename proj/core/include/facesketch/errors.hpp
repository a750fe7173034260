#pragma once

#include <stdexcept>
#include <string>

namespace facesketch {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments, malformed configs, constraint violations. CLI exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Missing or unreadable weight files. CLI exit code 3.
class WeightsError : public Error {
public:
    explicit WeightsError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf losses or gradients during optimization. CLI exit code 4.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace facesketch

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace equalloc {

// Base for every error raised by the library. The CLI maps subclasses to exit
// codes: config/precondition -> 2, capacity -> 3, numerical -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
        : Error(what + ": expected K=" + std::to_string(expected) + ", got " +
                std::to_string(actual)),
          expected_(expected),
          actual_(actual) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Problem too large for an exhaustive method.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Utility configuration the requested solver cannot handle (e.g. non-concave).
class UnsupportedSpecError : public Error {
public:
    using Error::Error;
};

// log of a non-positive value, non-finite intermediate results, etc.
class DomainError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace equalloc

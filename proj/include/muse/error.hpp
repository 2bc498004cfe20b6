#pragma once

#include <stdexcept>
#include <string>

namespace muse {

// Invalid arguments or violated preconditions. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or missing input data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A statistic that is mathematically undefined for the given input,
// e.g. a correlation involving a constant sequence.
class UndefinedError : public std::domain_error {
public:
    explicit UndefinedError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite values produced during optimisation. Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace muse

#pragma once

#include <stdexcept>
#include <string>

namespace atlab {

// Base for everything thrown by the library. The CLI maps subclasses to
// distinct exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration (files, CLI flags, invalid arguments).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Corrupt, truncated or otherwise unusable data files and checkpoints.
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values, diverged optimization, violated numeric preconditions.
class NumericError : public Error {
public:
    using Error::Error;
};

// Tensor shape / dimension mismatches.
class ShapeError : public Error {
public:
    using Error::Error;
};

}  // namespace atlab

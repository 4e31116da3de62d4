#pragma once

#include <stdexcept>
#include <string>

namespace ztwin {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric argument is outside its documented domain.
struct ParameterError : Error {
    using Error::Error;
};

// Min-max scaling is undefined: all values in the series are equal.
struct DegenerateRange : Error {
    using Error::Error;
};

// Not enough data points for the requested operation.
struct InsufficientData : Error {
    using Error::Error;
};

// A tensor/window has the wrong length for the model it is fed to.
struct ShapeError : Error {
    using Error::Error;
};

// A state or action index is outside the table.
struct IndexError : Error {
    using Error::Error;
};

// File could not be read, written, or parsed.
struct IoError : Error {
    using Error::Error;
};

// An operation was invoked on an object that is not ready for it.
struct StateError : Error {
    using Error::Error;
};

// Configuration value rejected; message names the offending field path.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace ztwin

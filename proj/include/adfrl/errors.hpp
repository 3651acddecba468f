#ifndef ADFRL_ERRORS_HPP
#define ADFRL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace adfrl {

// Base class for all library errors; message carries a module tag.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// Bad configuration value or degenerate setup.
struct ConfigError : Error {
    using Error::Error;
};

// Operation invoked in the wrong order (e.g. backward before forward).
struct StateError : Error {
    using Error::Error;
};

// File missing or unreadable.
struct IoError : Error {
    using Error::Error;
};

// Rule transformation with an invalid payload or missing target.
struct DeltaError : Error {
    using Error::Error;
};

// API misuse (empty batch, missing checkpoint, ...).
struct UsageError : Error {
    using Error::Error;
};

} // namespace adfrl

#endif

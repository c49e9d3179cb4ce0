#pragma once

#include <stdexcept>
#include <string>

namespace thinkrl {

/// Invalid configuration value; message names the violated bound.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dimension or trajectory-shape mismatch.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed serialized data; message carries the line number when known.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller handed in data that violates an operation precondition.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Trajectory does not match any legal response shape.
struct FormatViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form of a double, locale independent.
std::string format_double(double v);

}  // namespace thinkrl

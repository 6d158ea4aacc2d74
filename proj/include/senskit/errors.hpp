#pragma once

#include <stdexcept>
#include <string>

namespace senskit {

/// Malformed input, invalid configuration or a grid that fails validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-convergence, singular systems, divergence of training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace senskit

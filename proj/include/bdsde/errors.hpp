#pragma once

#include <stdexcept>
#include <string>

namespace bdsde {

/// Bad or inconsistent user input: config keys, model coefficients,
/// mismatched grids. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure during a solve: NaN/Inf fields, blow-up, degenerate
/// diffusion. Carries the time-step index where the solve aborted
/// (-1 when not step-specific). Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, int step = -1)
        : std::runtime_error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Filesystem failure. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bdsde

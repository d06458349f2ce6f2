#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace qbsde {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or incomplete configuration. `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Non-finite or out-of-domain numeric input.
class InputError : public Error {
public:
    using Error::Error;
};

/// A hypothesis of the existence theory does not hold for the given constants.
class GateError : public Error {
public:
    GateError(const std::string& message, double offending_value)
        : Error(message), value_(offending_value) {}
    double offending_value() const noexcept { return value_; }

private:
    double value_;
};

/// Least-squares design that stays singular after regularisation.
class RegressionError : public Error {
public:
    RegressionError(const std::string& message, double condition)
        : Error(message), condition_(condition) {}
    double condition_number() const noexcept { return condition_; }

private:
    double condition_;
};

/// Requested allocation exceeds the configured memory budget.
class SizeError : public Error {
public:
    using Error::Error;
};

const char* version() noexcept;

double norm(std::span<const double> v) noexcept;
bool all_finite(std::span<const double> v) noexcept;

/// Radial projection onto the closed ball of the given radius.
/// Idempotent: the result always satisfies norm(v) <= radius as computed by
/// `norm`, so clipping an already clipped vector leaves it bit-identical.
/// Returns true when the vector was modified.
bool clip_to_ball(std::span<double> v, double radius) noexcept;

}  // namespace qbsde

#pragma once

#include <stdexcept>
#include <string>

namespace roadfield {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or numerics parameter lies outside its admissible domain.
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// Central differencing would lose the sign structure of the operator.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Operation called on a geometry it does not support, or grids do not match.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Vector length does not conform to the operator or grid.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Sparse factorization failed (singular shifted matrix).
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// Iterative eigensolver did not converge within the iteration budget.
class IterativeFailure : public Error {
public:
    IterativeFailure(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

/// The truncated eigenvalue is nonnegative, so no eigenfunction subsolution exists.
class NoSubsolutionError : public Error {
public:
    using Error::Error;
};

/// A time step kept producing negative states after all dt halvings.
class StepRejected : public Error {
public:
    using Error::Error;
};

/// Configuration document is malformed or violates the schema.
/// `pointer()` is a JSON pointer to the offending field (may be empty).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string pointer = {})
        : Error(pointer.empty() ? what : pointer + ": " + what), message_(what), pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }
    /// Message without the pointer prefix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::string pointer_;
};

}  // namespace roadfield

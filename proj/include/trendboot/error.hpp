#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trendboot {

/// Bad input or parameter. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation could not be carried out (singular design, empty windows).
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularDesignError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Failure inside one bootstrap or Monte Carlo replicate.
class ReplicateError : public NumericalError {
public:
    ReplicateError(std::size_t replicate, const std::string& what)
        : NumericalError("replicate " + std::to_string(replicate) + ": " + what),
          replicate_(replicate) {}

    std::size_t replicate() const noexcept { return replicate_; }

private:
    std::size_t replicate_;
};

} // namespace trendboot

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seirt {

/// Input violates a documented precondition of a numerical routine.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (files, CLI arguments, configs).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a right-hand side produces a non-finite derivative.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(double t, std::size_t component, const std::string& what)
        : std::runtime_error(what), t_(t), component_(component) {}

    double time() const noexcept { return t_; }
    std::size_t component() const noexcept { return component_; }

private:
    double t_;
    std::size_t component_;
};

}  // namespace seirt

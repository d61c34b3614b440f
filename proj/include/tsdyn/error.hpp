#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsdyn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid construction parameter (shape, scale, config field).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Non-finite or runaway state in a numerical integrator.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// Estimator or interval with no defined value for the given input.
class UndefinedError : public Error {
public:
    using Error::Error;
};

// Per-arm interval failure; carries the offending arm index.
class UndefinedIntervalError : public UndefinedError {
public:
    explicit UndefinedIntervalError(std::size_t arm)
        : UndefinedError("confidence interval undefined for arm " + std::to_string(arm) +
                         ": arm was never pulled"),
          arm_(arm) {}

    std::size_t arm() const noexcept { return arm_; }

private:
    std::size_t arm_;
};

// Configuration rejected before any computation; message carries a field path.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tsdyn

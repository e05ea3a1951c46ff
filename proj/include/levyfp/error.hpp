#pragma once

#include <stdexcept>
#include <string>

namespace levyfp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A model coefficient evaluated to a non-finite value or threw.
class CoefficientError : public Error {
public:
    CoefficientError(std::string coefficient, const std::string& what)
        : Error(what), coefficient_(std::move(coefficient)) {}
    const std::string& coefficient() const noexcept { return coefficient_; }

private:
    std::string coefficient_;
};

/// Fixed-point iteration for the inverse flow did not converge.
class NonContractionError : public Error {
public:
    using Error::Error;
};

/// det(1 + D_y p) was not positive.
class InvertibilityError : public Error {
public:
    using Error::Error;
};

/// The Lévy measure violates an integrability requirement.
class MeasureError : public Error {
public:
    using Error::Error;
};

/// The requested quadrature tolerance cannot be met with the given number of panels.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& what, int required_panels)
        : Error(what), required_panels_(required_panels) {}
    int required_panels() const noexcept { return required_panels_; }

private:
    int required_panels_;
};

/// Operator assembly failed at a specific node.
class AssemblyError : public Error {
public:
    using Error::Error;
};

/// Iterative linear solve did not reach the requested residual.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Experiment configuration is malformed. `line` is 0 when no source position applies.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line = 0) : Error(what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace levyfp

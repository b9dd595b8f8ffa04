#pragma once

#include <stdexcept>
#include <string>

namespace se3ocp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix passed to vee() has a symmetric part above tolerance.
class NotSkew : public Error {
public:
    using Error::Error;
};

/// A matrix handed to Rotation is not in SO(3) within tolerance.
class NotRotation : public Error {
public:
    using Error::Error;
};

/// A sphere of the body sits (numerically) at the attracting center.
class SingularPotential : public Error {
public:
    using Error::Error;
};

/// h * |J^-1 Pi| leaves the solvability margin of the implicit rotation solve.
class StepTooLarge : public Error {
public:
    using Error::Error;
};

/// An iterative solve failed to reach its tolerance.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// A weight matrix is not symmetric positive definite.
class SingularWeight : public Error {
public:
    using Error::Error;
};

/// A linear system required by a solver is (numerically) singular.
class SingularJacobian : public Error {
public:
    SingularJacobian(const std::string& what, double condition)
        : Error(what), condition_(condition) {}

    double condition() const { return condition_; }

private:
    double condition_;
};

/// The SQP step could not be computed (rank-deficient constraint Jacobian).
class InfeasibleSubproblem : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration; field() names the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : Error(field + ": " + message), field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace se3ocp

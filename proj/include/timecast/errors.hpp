#pragma once

#include <stdexcept>
#include <string>

namespace timecast {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class DegenerateStageError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations, double primal_residual,
                     double dual_residual)
        : Error(what),
          iterations_(iterations),
          primal_residual_(primal_residual),
          dual_residual_(dual_residual) {}

    int iterations() const noexcept { return iterations_; }
    double primal_residual() const noexcept { return primal_residual_; }
    double dual_residual() const noexcept { return dual_residual_; }

private:
    int iterations_;
    double primal_residual_;
    double dual_residual_;
};

}  // namespace timecast

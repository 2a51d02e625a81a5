#ifndef KINETIC_ERROR_HPP
#define KINETIC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace kinetic {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (non-positive theta, p < 1, ...).
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Result not representable (e.g. cosh overflow).
class RangeError : public Error
{
public:
    using Error::Error;
};

/// Non-finite state or failed root-finding. `time` is the orbit time of failure
/// when known, `residual` the last mismatch when a solver gave up.
class NumericalError : public Error
{
public:
    explicit NumericalError(const std::string& what, double time = 0.0, double residual = 0.0)
        : Error(what), time_(time), residual_(residual)
    {}
    double time() const noexcept { return time_; }
    double residual() const noexcept { return residual_; }

private:
    double time_;
    double residual_;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

/// A perturbation stage exceeded its share of the sigma_p budget.
class BudgetError : public Error
{
public:
    BudgetError(const std::string& what, double suggested_r) : Error(what), suggested_r_(suggested_r) {}
    double suggested_r() const noexcept { return suggested_r_; }

private:
    double suggested_r_;
};

/// No crossing of the reference face was found within the lookback horizon.
class LookbackError : public Error
{
public:
    using Error::Error;
};

/// Wraps a failure inside run_pipeline with the id of the stage that failed.
class PipelineError : public Error
{
public:
    PipelineError(std::string stage, const std::string& what, int exit_code)
        : Error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code)
    {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

} // namespace kinetic

#endif // KINETIC_ERROR_HPP

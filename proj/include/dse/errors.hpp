#pragma once

#include <stdexcept>
#include <string>

namespace dse {

struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a propagated state leaves the finite/guarded region.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, double t) : std::runtime_error(what), time(t) {}
    double time;
};

struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    InfeasibleError(const std::string& what, double best) : std::runtime_error(what), best_max_eig(best) {}
    double best_max_eig;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dse

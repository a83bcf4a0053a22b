#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace msode {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* version = "0.1.0";

// Configuration / usage problems: malformed files, inconsistent shapes,
// violated preconditions.  CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures during an otherwise well-posed computation.  CLI maps
// these to exit code 1; the sampler treats them as rejected evaluations.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Log-linear predictor left the safe range of exp() (beyond 1e+-300).
struct RateOverflowError : NumericalError {
    int from, to;
    RateOverflowError(int from_, int to_, double eta)
        : NumericalError("rate predictor overflow on transition " + std::to_string(from_ + 1) +
                         "->" + std::to_string(to_ + 1) + " (eta = " + std::to_string(eta) + ")"),
          from(from_), to(to_) {}
};

// Adaptive integrator gave up (step underflow or step budget exhausted).
struct SolverFailure : NumericalError {
    double at_time;
    SolverFailure(const std::string& what_, double t)
        : NumericalError(what_ + " at t = " + std::to_string(t)), at_time(t) {}
};

}  // namespace msode

#pragma once

#include <stdexcept>
#include <string>

namespace jctraj {

// Contract violations (bad dimensions, out-of-range parameters, unknown
// preset names) throw std::invalid_argument directly.  The types below mark
// runtime failures a caller may want to catch individually.

// State norm or trace fell below representable tolerance, e.g. renormalizing
// a zero vector.
struct numerical_degeneracy : std::runtime_error {
    explicit numerical_degeneracy(const std::string& msg)
        : std::runtime_error(msg) {}
};

// An iterative procedure (fit, steady-state refinement, ladder) failed to
// converge within its budget.
struct convergence_error : std::runtime_error {
    explicit convergence_error(const std::string& msg)
        : std::runtime_error(msg) {}
};

// The steady state is not unique (the Liouvillian kernel has dimension > 1),
// so "the" steady state is ill-posed.
struct degenerate_steady_state : std::runtime_error {
    explicit degenerate_steady_state(const std::string& msg)
        : std::runtime_error(msg) {}
};

// Fock-space truncation was exceeded: population reached the top of the
// ladder beyond the configured threshold, or a requested computation cannot
// fit under the truncation cap.
struct truncation_error : std::runtime_error {
    explicit truncation_error(const std::string& msg)
        : std::runtime_error(msg) {}
};

// Sample-rate conversion that is not an integer decimation, or an attempt to
// combine traces on incompatible time grids.
struct resampling_error : std::runtime_error {
    explicit resampling_error(const std::string& msg)
        : std::runtime_error(msg) {}
};

// A model distribution fit did not converge from any start point.
struct fit_error : convergence_error {
    explicit fit_error(const std::string& msg) : convergence_error(msg) {}
};

// Discrete-time transition model invalid at the requested sample spacing
// (per-step transition probability too large for the two-point recursion).
struct undersampled_model : std::runtime_error {
    explicit undersampled_model(const std::string& msg)
        : std::runtime_error(msg) {}
};

// Forward-backward underflow or non-finite posterior.
struct decoding_error : std::runtime_error {
    explicit decoding_error(const std::string& msg)
        : std::runtime_error(msg) {}
};

// Configuration file problem; carries file and line for the CLI to report.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace jctraj

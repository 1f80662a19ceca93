#ifndef VRPF_ERRORS_HPP
#define VRPF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vrpf {

/// Invalid configuration: bad shapes, duplicate stream labels, out-of-range
/// hyperparameters. Raised before any sampling happens.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-finite inputs, non-positive-definite innovation
/// covariance, and similar conditions detected mid-computation.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// A rejection loop (PRC trials or Bernoulli-race iterations) exceeded its cap.
struct RunawayError : std::runtime_error {
    explicit RunawayError(const std::string& what) : std::runtime_error(what) {}
};

/// Every particle weight at some step is zero; the step's log-mean term
/// would be -inf. Usually means the M schedule is inconsistent with the
/// proposal.
struct DegenerateWeightsError : std::runtime_error {
    explicit DegenerateWeightsError(const std::string& what) : std::runtime_error(what) {}
};

/// A test oracle detected it was handed a non-reproducible evaluator.
struct OracleIntegrityError : std::runtime_error {
    explicit OracleIntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure, with the offending path in the message.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vrpf

#endif  // VRPF_ERRORS_HPP

#pragma once

#include <stdexcept>
#include <string>

namespace permrate {

// Base class for everything this library throws on invalid input or a
// numerically unusable configuration.  Callers that want to distinguish
// recoverable estimation failures (a permuted sample with an empty kernel
// window, a singular local fit, ...) from programming errors can catch
// EstimationError; the permutation/bootstrap engines resample on it.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Recoverable failures of a single estimation attempt.
struct EstimationError : Error {
  using Error::Error;
};

// Too few observations carry positive kernel weight near the evaluation point.
struct EmptyWindowError final : EstimationError {
  using EstimationError::EstimationError;
};

// The local polynomial normal equations are rank deficient.
struct SingularFitError final : EstimationError {
  using EstimationError::EstimationError;
};

// A pilot quantity needed by the plug-in bias correction is unusable.
struct BiasUnstableError final : EstimationError {
  using EstimationError::EstimationError;
};

// A variance estimate came out non-positive / non-finite, or a density
// denominator fell below the configured floor.
struct VarianceUnstableError final : EstimationError {
  using EstimationError::EstimationError;
};

// The studentizing scale of a test statistic is zero or not finite.
struct DegenerateVarianceError final : EstimationError {
  using EstimationError::EstimationError;
};

// A two-sample split would leave one sample empty (or otherwise unusable).
struct DegenerateSplitError final : Error {
  using Error::Error;
};

// A candidate null-shift value is outside the transform's domain.
struct InvalidDeltaError final : Error {
  using Error::Error;
};

// Requested subsample sizes cannot support the estimator.
struct DegenerateSubsampleError final : Error {
  using Error::Error;
};

// A data-driven bandwidth rule failed (degenerate inputs, empty side, ...).
struct BandwidthError final : Error {
  using Error::Error;
};

// A Monte Carlo run is unusable: too many replication failures, or a
// size-adjustment search that did not converge.
struct SimulationError final : Error {
  using Error::Error;
};

// Malformed configuration (bad enum string, non-positive bandwidth, ...).
struct ConfigError final : Error {
  using Error::Error;
};

// Malformed input file; message carries line/column context.
struct ParseError final : Error {
  using Error::Error;
};

}  // namespace permrate

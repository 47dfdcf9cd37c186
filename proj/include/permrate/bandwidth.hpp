#pragma once

#include <cstddef>

#include "permrate/errors.hpp"
#include "permrate/kernel.hpp"
#include "permrate/problem.hpp"

namespace permrate {

// How the bandwidth was chosen: supplied by the caller, or computed by the
// data-driven plug-in rule for local-linear regression.
enum class BandwidthRule { fixed, ik_llr };

// All tuning constants of the data-driven rule live here so they can be
// adjusted without touching the pipeline.  The kernel-dependent multiplier
// of the final plug-in is not a free constant: it is derived from the
// kernel's own moment matrices (see plug_in_constant).
struct IkConstants {
  double pilot_factor = 1.84;         // pilot half-width: factor * sd(x) * n^(-1/5)
  double curvature_factor = 3.56;     // curvature windows: factor * (...)^(1/7) * n_side^(-1/7)
  double regularizer_factor = 2160.0; // finite-sample penalty added to the squared curvature
  std::size_t min_side = 5;           // observations required on each side of the point
  std::size_t curvature_min_window = 4;  // observations required by each one-sided quadratic
  std::size_t small_sample = 50;      // warn below this total sample size
};

// A chosen bandwidth plus the pilot quantities behind it.  Diagnostics are
// zero when the rule is fixed.  The left/right suffixes refer to the two
// sides of the evaluation point in original regressor coordinates.
struct BandwidthChoice {
  double value = 0.0;
  BandwidthRule rule = BandwidthRule::fixed;
  double pilot_h = 0.0;            // first-stage window half-width
  double density_at_point = 0.0;   // regressor density estimate at the point
  double variance_at_point = 0.0;  // pooled residual variance near the point
  double third_derivative = 0.0;   // global cubic curvature-change estimate
  double curvature_h_left = 0.0;   // second-stage window half-widths
  double curvature_h_right = 0.0;
  double curvature_left = 0.0;     // one-sided second-derivative estimates
  double curvature_right = 0.0;
  double regularizer_left = 0.0;   // penalties keeping the plug-in finite
  double regularizer_right = 0.0;
  bool small_sample_warning = false;
};

// Wraps a user-supplied bandwidth.  Throws ConfigError unless h is a
// positive finite number.
BandwidthChoice fixed_bandwidth(double h);

// Kernel-dependent multiplier of the final plug-in: the mean-squared-error
// optimum for a local-linear fit scales with
// (variance_factor / bias_factor^2)^(1/5), with one-sided moments at a
// boundary point and full-axis moments at an interior one.  Triangular
// kernel: 3.437544 boundary, 1.888175 interior.
double plug_in_constant(KernelId kernel, EvalSide side);

// Data-driven bandwidth for local-linear estimation at the problem's
// evaluation point, decreasing at rate n^(-1/5).  Three stages:
//   1. a pilot window (pilot_factor * sd * n^(-1/5)) yields the regressor
//      density and the pooled residual variance at the point;
//   2. a global cubic between the side medians pins the third derivative,
//      which sizes one-sided quadratic windows on each side of the point;
//      the quadratics give one-sided second derivatives, each guarded by a
//      regularizer that keeps the plug-in finite when curvature vanishes;
//   3. the optimal constant combines them, one-sided on each side for a
//      cutoff problem, pooled across sides at an interior point.
// The result is clamped to the regressor range and deterministic.
// Throws BandwidthError when either side of the point is too thin or the
// pilot window is degenerate (constant responses or regressors), and
// ConfigError for density problems, which carry no regression responses.
BandwidthChoice ik_bandwidth(const Problem& p, KernelId kernel, const IkConstants& constants = IkConstants{});

}  // namespace permrate

#pragma once

#include <cstddef>
#include <vector>

#include "permrate/estimate.hpp"
#include "permrate/permtest.hpp"
#include "permrate/problem.hpp"

namespace permrate {

/// How the per-delta tests are produced when the test is inverted into a
/// confidence set.
enum class InvertMode {
  /// Retest after transforming the first sample so its parameter matches the
  /// second sample's under the candidate delta. Carries the exact-coverage
  /// property when the samples are equal up to that transformation.
  transform,
  /// Shift the observed studentized statistic by sqrt(nh)*delta/sigma_hat and
  /// compare against the reference set of the untransformed data. Much
  /// cheaper (one permutation pass total) and asymptotically equivalent, but
  /// without the exactness property. Additive families only.
  shift_stat,
};

/// Decision record for one tested delta.
struct DeltaDecision {
  double delta = 0.0;
  double phi = 0.0;              ///< rejection probability of the randomized test, in [0, 1]
  bool in_conservative = false;  ///< phi < 1
  bool in_randomized = false;    ///< u > phi
};

/// Search controls for inverting the test. Grid widths are measured in
/// standard errors of the estimated difference (on the log scale for the
/// density ratio family, whose deltas are multiplicative and positive).
struct InvertPlan {
  PermPlan perm;
  double alpha = 0.05;
  std::size_t grid_points = 41;  ///< coarse grid size; must be odd so the point estimate sits on the grid
  double half_width = 5.0;       ///< grid half-width in standard errors
  InvertMode mode = InvertMode::transform;
};

/// A confidence set produced by test inversion: per-delta decisions on the
/// search grid plus interval hulls with bisection-refined endpoints.
///
/// The randomized set {delta : u > phi(delta)} uses one shared uniform u so
/// that membership is exact test inversion point by point; the conservative
/// set {delta : phi(delta) < 1} contains it for any u. Hull endpoints at the
/// grid edge are reported as the edge value (the true boundary may lie
/// outside the searched range; see all_included).
struct ConfidenceSet {
  double level = 0.0;           ///< nominal coverage 1 - alpha
  double u = 0.0;               ///< the single uniform used for randomized membership
  double point_estimate = 0.0;  ///< grid centre: estimated difference (or density ratio)
  double delta_tolerance = 0.0; ///< bisection stopping width (log-scale width for ratios)
  std::vector<DeltaDecision> grid;

  double lo = 0.0, hi = 0.0;                          ///< hull of the realized randomized set
  double lo_conservative = 0.0, hi_conservative = 0.0;///< hull of the conservative set

  /// True when the in-decisions of both sets each form one contiguous block
  /// on the grid. A false value is reported, never repaired.
  bool single_interval = true;
  /// Warning: the conservative set spans the whole grid, so no boundary was
  /// found inside the searched range (alpha too small or sample too small).
  bool all_included = false;

  /// Hull membership of the realized randomized set.
  bool contains(double delta) const { return delta >= lo && delta <= hi; }
  /// Hull membership of the conservative set.
  bool contains_conservative(double delta) const {
    return delta >= lo_conservative && delta <= hi_conservative;
  }
};

/// Inverts the studentized permutation test over candidate discrepancies.
///
/// Every per-delta test shares the plan's seed, so the whole set is
/// deterministic and the reference permutation streams coincide across
/// deltas. One uniform is drawn per set (not per delta) for randomized
/// membership. Mean-like families search an additive grid centred on the
/// estimated difference; the density family searches a multiplicative grid
/// of positive ratios that always includes 1.
ConfidenceSet invert(const Problem& p, const InvertPlan& plan, double h, const EstimatorSpec& spec);

}  // namespace permrate

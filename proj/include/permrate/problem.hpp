#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permrate/errors.hpp"
#include "permrate/estimate.hpp"

namespace permrate {

// The five supported two-population comparisons:
//   two_sample_mean     : conditional means at an interior point;
//   two_sample_quantile : conditional quantiles at an interior point;
//   two_sample_ratio    : ratios of two conditional means (delta method);
//   rdd_mean            : conditional mean jump at a cutoff, sample split by
//                         side and the left side reflected;
//   density_jump        : density jump at a point, rows halved and the
//                         second half negated.
enum class ProblemKind { two_sample_mean, two_sample_quantile, two_sample_ratio, rdd_mean, density_jump };

ProblemKind problem_kind_from_string(const std::string& s);
std::string to_string(ProblemKind k);

struct ProblemConfig {
  ProblemKind kind = ProblemKind::two_sample_mean;
  double point = 0.0;     // evaluation point (two-sample) or jump location (rdd/density)
  double quantile = 0.5;  // two_sample_quantile only
};

// Canonical form of a testing problem: rows reordered so sample 1 comes
// first (stable within samples), regressors already centered on the jump
// location and reflected for the second rdd sample / negated for the second
// density half.  Permutations reshuffle these canonical rows; the labels
// member keeps the original input-row-order assignment for reporting.
struct Problem {
  ProblemConfig config;
  std::vector<double> x;
  std::vector<double> y;   // empty for density_jump
  std::vector<double> y2;  // denominator response, two_sample_ratio only
  std::size_t n1 = 0;
  std::vector<std::uint8_t> labels;  // per input row, 1 or 2
  double eval_x = 0.0;               // in canonical coordinates
  EvalSide side = EvalSide::interior;

  std::size_t n() const { return x.size(); }
  std::size_t n2() const { return x.size() - n1; }
  // Identity point of the delta transformation: 1 for the density ratio,
  // 0 for every difference-type parameter.
  double delta0() const { return config.kind == ProblemKind::density_jump ? 1.0 : 0.0; }
};

// Builds the canonical problem from raw columns.
//   two_sample_*  : x, y (+ y2 for ratio) and groups (values 1/2) required;
//   rdd_mean      : x, y required, split by side of config.point;
//   density_jump  : x required, first floor(n/2) input rows become sample 1.
// Throws DegenerateSplitError when either sample would be empty and
// ConfigError on malformed columns.
Problem build_problem(const ProblemConfig& config, std::span<const double> x, std::span<const double> y = {},
                      std::span<const double> y2 = {}, std::span<const int> groups = {});

// Applies the sample-1 transformation indexed by delta: responses shifted
// by -delta (mean-like kinds), shifted by -delta * y2 (ratio), or regressors
// scaled by delta / (1/delta) on each side of zero (density).  delta equal
// to delta0 returns the problem unchanged.  Throws InvalidDeltaError for a
// non-positive density ratio.
Problem apply_delta(const Problem& p, double delta);

}  // namespace permrate

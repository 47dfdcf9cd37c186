#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permrate/bandwidth.hpp"
#include "permrate/permtest.hpp"
#include "permrate/problem.hpp"

namespace permrate {

// The built-in simulation designs.
//   design1           : two conditional means at x = 0.5; the curves differ
//                       away from the point but share the value there, and
//                       the response variances may differ.
//   design2           : ratio of a conditional mean to a noisy constant-mean
//                       denominator; the ratio is 1/mu for both samples.
//   example1          : globally linear regressions under heavy sample-size
//                       imbalance; the fitted lines are compared at x = 0
//                       with a unit bandwidth, i.e. by plain least squares.
//   sharp_null_custom : both samples from one identical curved DGP, so the
//                       pooled rows are fully exchangeable.
//   density_null      : a single continuous asymmetric regressor density
//                       split into two halves; the edge-density contrast at
//                       zero vanishes even though the halves are not
//                       exchangeable.
enum class DesignId { design1, design2, example1, sharp_null_custom, density_null };

// Inference methods a simulation cell can score.
//   nsp : permutation test on the raw statistic
//   sp  : permutation test on the studentized statistic
//   t   : normal-critical-value test on the studentized statistic
//   sb  : wild-bootstrap comparator
//   ss  : subsampling comparator
enum class Method { nsp, sp, t, sb, ss };

DesignId design_from_string(const std::string&);
Method method_from_string(const std::string&);
std::string to_string(DesignId);
std::string to_string(Method);

struct DesignParams {
  DesignId id = DesignId::design1;
  double var1 = 1.0;   // response noise variance, sample 1
  double var2 = 1.0;   // response noise variance, sample 2
  std::size_t n1 = 100;
  std::size_t n2 = 1900;
  double mu = 1.0;     // denominator mean, design2 only
  double shift = 0.0;  // location shift added to sample 1's responses
};

// The two built-in conditional-mean curves: zero on |x - 0.5| <= 0.3,
// opposite-signed parabolic arcs outside.
double curve1(double x);
double curve2(double x);

// One simulated problem.  Draws are keyed by (seed, rep), so a fixed seed
// reproduces the same sample sequence for any thread count, and the draw
// for a given rep is identical across shift values except for the shifted
// responses (common random numbers across a power curve).
Problem draw(const DesignParams& d, std::uint64_t seed, std::uint64_t rep);

// Estimator settings each design is scored with.
EstimatorSpec design_spec(DesignId id);

// Per-replication bandwidth policy: one fixed value, or the plug-in rule
// recomputed on every simulated sample.
struct BandwidthPolicy {
  BandwidthRule rule = BandwidthRule::fixed;
  double value = 0.1;  // used by the fixed rule only
};
BandwidthPolicy fixed_h(double value);
BandwidthPolicy data_driven_h();

struct SimPlan {
  std::size_t sims = 2000;   // replications
  std::size_t draws = 500;   // permutation/bootstrap/subsample draws per replication
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 0;           // 0 = runtime default; replications run in parallel, inner loops serially
  bool conservative_ties = false;
  double max_failure_rate = 0.01;  // tolerated fraction of failed replications per cell
};

struct SimCell {
  DesignParams design;
  BandwidthPolicy h;
  Method method = Method::sp;
  double rate = 0.0;    // mean rejection; fractional on randomized ties
  double mc_se = 0.0;   // sqrt(rate * (1 - rate) / sims_ok)
  double mean_h = 0.0;  // average bandwidth actually used
  std::size_t sims_ok = 0;
  std::size_t failures = 0;
};

struct SimTable {
  std::vector<SimCell> cells;  // design-major, then bandwidth policy, then method
  std::size_t sims = 0;
  std::size_t draws = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

// Rejection rates for every (design, bandwidth policy, method) combination.
// Each replication draws one sample per design and shares it across the
// policies and methods; the permutation pass is shared between nsp and sp.
// Deterministic for a fixed seed regardless of thread count.  Replications
// whose estimation fails are excluded from the cell's rate and counted in
// failures; a cell losing more than max_failure_rate of its replications
// fails the whole run with SimulationError.
SimTable rejection_table(std::span<const DesignParams> designs, std::span<const BandwidthPolicy> h_rules,
                         std::span<const Method> methods, const SimPlan& plan);

struct PowerPoint {
  double shift = 0.0;
  double rate = 0.0;
  double mc_se = 0.0;
  std::size_t sims_ok = 0;
  std::size_t failures = 0;
};

struct PowerCurve {
  Method method = Method::sp;
  bool size_adjusted = false;
  double alpha_nominal = 0.05;  // level actually applied after any adjustment
  double t_critical = 0.0;      // simulated |s|-scale critical value; size-adjusted t only
  double null_rate = 0.0;       // rejection at shift 0 under the applied level
  double null_sd = 0.0;         // SD of the estimated difference under the null
  std::size_t search_steps = 0; // bisection evaluations spent on the adjustment
  std::vector<PowerPoint> points;  // in the caller's shift order
};

// Rejection rate per shift with common random numbers across shifts.  The
// base parameters must describe the null (shift 0), and the shift grid must
// contain 0.  With size_adjust the nominal level is first calibrated on the
// null replications: the resampling methods bisect the level until the mean
// null rejection (fractional on ties) lands within 0.002 of alpha, failing
// with SimulationError after 30 steps when the objective's discreteness
// makes that window unreachable (use more replications or draws); t instead
// takes the empirical upper-alpha quantile of |s| as its critical value,
// which keeps its null rate at or below alpha within 1/R of it.
PowerCurve power_curve(const DesignParams& base, std::span<const double> shifts, Method method, bool size_adjust,
                       const BandwidthPolicy& h_rule, const SimPlan& plan);

// Flat CSV renderings with one header row, for plotting tools.
std::string to_csv(const SimTable& table);
std::string to_csv(const PowerCurve& curve);

}  // namespace permrate

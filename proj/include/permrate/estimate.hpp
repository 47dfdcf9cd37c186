#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permrate/errors.hpp"
#include "permrate/kernel.hpp"

namespace permrate {

// What a single-sample local estimator targets.
//   local_mean     : conditional mean at a point (local polynomial fit).
//   local_quantile : conditional quantile at a point (kernel-weighted
//                    left-endpoint quantile).
//   density_edge   : half the gap between the density just right and just
//                    left of zero, from signed one-sided kernel sums.
enum class Family { local_mean, local_quantile, density_edge };

enum class BiasMode { plugin, order_bump, none };
enum class VarianceMode { plugin, nn_matched, sandwich };

// Whether the evaluation point is interior to the regressor support or a
// right boundary (all usable mass on [x0, x0 + h * support)).
enum class EvalSide { interior, boundary_right };

Family family_from_string(const std::string&);
BiasMode bias_from_string(const std::string&);
VarianceMode variance_from_string(const std::string&);
std::string to_string(Family);
std::string to_string(BiasMode);
std::string to_string(VarianceMode);

// Every tunable of the single-sample estimators in one place.
struct EstimatorSpec {
  Family family = Family::local_mean;
  KernelId kernel = KernelId::triangular;
  int order = 1;                  // polynomial order for local_mean
  double quantile = 0.5;          // level for local_quantile
  BiasMode bias = BiasMode::order_bump;
  VarianceMode variance = VarianceMode::nn_matched;
  int nn_neighbors = 3;           // J for nn_matched residual variances
  double pilot_factor = 1.5;      // pilot bandwidth = pilot_factor * h
  int edge_bias_kernel_power = 1; // t in the boundary slope-bias moment (1 or 2)
  double density_floor = 1e-6;    // density estimates below this are errors
  std::size_t min_window = 5;     // required count of positive-weight points
};

struct EvalPoint {
  double x = 0.0;
  EvalSide side = EvalSide::interior;
};

// Output of estimate().  theta_raw is the uncorrected point estimate,
// bias_hat the rate-free plug-in bias constant, and
//   theta = theta_raw - h^bias_power * bias_hat.
// Under order-bump the higher-order refit itself becomes theta_raw and
// bias_hat stays 0.  xi2 is scaled as n_k * h * Var(theta), the unit the
// studentized statistic divides by.
struct EstimateResult {
  double theta_raw = 0.0;
  double bias_hat = 0.0;
  int bias_power = 0;
  double theta = 0.0;
  double xi2 = 0.0;
  double h = 0.0;
  std::size_t n_eff = 0;
};

// A single sample's columns, sorted for estimation:
//   - local_mean / local_quantile: ascending by x, ties by original row id;
//   - density_edge: ascending by |x|, ties by original row id.
// ids carry original row indices (used for deterministic neighbor
// tie-breaking); y2 is a second response column for ratio problems and may
// be empty otherwise.
struct SortedView {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const std::uint32_t> ids;
  std::span<const double> y2;
};

// Full estimate for one sample: point estimate, bias correction, variance.
// Throws EstimationError subclasses on degenerate windows/fits.
EstimateResult estimate(const SortedView& sample, const EvalPoint& at, double h, const EstimatorSpec& spec);

// Convenience front end that copies, sorts appropriately, and delegates.
EstimateResult estimate(std::vector<double> x, std::vector<double> y, const EvalPoint& at, double h,
                        const EstimatorSpec& spec);

// ---- lower-level building blocks (exposed for tests and reuse) ----

struct LprFit {
  std::vector<double> beta;  // coefficients in u = (x - x0)/h coordinates
  std::size_t lo = 0, hi = 0;  // window [lo, hi) into the sorted arrays
  std::size_t n_eff = 0;
  double weight_sum = 0.0;   // sum of kernel weights in the window
};

// Weighted polynomial fit of y on powers of (x - x0)/h.  xs ascending.
LprFit lpr_fit(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
               int order, EvalSide side, std::size_t min_window);

// Local constant (Nadaraya-Watson) mean; equals lpr_fit order 0.
double nw_mean(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
               EvalSide side, std::size_t min_window);

// Kernel-weighted quantile: smallest y whose cumulative weight reaches
// chi * total weight.  xs ascending.
double local_quantile(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
                      double chi, std::size_t min_window);

// Signed one-sided kernel sum (see Family::density_edge); xs sorted by |x|.
// n_total is the full sample size (zero-weight rows included in the scale).
double density_edge_stat(std::span<const double> xs_by_abs, double h, KernelId kernel, std::size_t n_total);

// One-sided kernel density estimate at 0 from the rows with sign `positive`,
// normalized by the one-sided kernel mass; xs sorted by |x|.
double edge_density(std::span<const double> xs_by_abs, double h, KernelId kernel, std::size_t n_total, bool positive);

}  // namespace permrate

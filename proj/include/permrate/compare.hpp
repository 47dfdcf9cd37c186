#pragma once

#include <cstdint>
#include <vector>

#include "permrate/permtest.hpp"

namespace permrate {

enum class ComparatorMethod { t_test, wild_bootstrap, subsample };

// Result of one of the reference inference methods run on the same
// studentized statistic as the permutation test.
struct ComparatorReport {
  ComparatorMethod method = ComparatorMethod::t_test;
  double stat = 0.0;     // observed studentized statistic
  double p_value = 1.0;
  bool reject_05 = false;
  std::vector<double> draws;  // resampled statistics (empty for the t-test)
  double pilot_g = 0.0;       // wild bootstrap: oversmoothing bandwidth used
  double h_used = 0.0;        // subsample: rescaled per-draw bandwidth
  std::size_t b1 = 0, b2 = 0; // subsample: per-sample subsample sizes
};

struct BootstrapPlan {
  std::size_t draws = 500;
  std::uint64_t seed = 0;
  double pilot_factor = 1.3;  // oversmoothing: g = pilot_factor * h
  int threads = 0;
};

struct SubsamplePlan {
  std::size_t draws = 500;
  std::size_t block = 0;            // total subsample size; 0 = ceil(n^(2/3))
  double bandwidth_exponent = 0.2;  // per-draw bandwidth h * (n/b)^exponent
  std::uint64_t seed = 0;
  int threads = 0;
};

// Two-sided normal test on an already-computed studentized statistic:
// p = 2(1 - Phi(|s_n|)).
ComparatorReport t_test(double s_n, double alpha);

// Wild bootstrap with per-observation sign weights: residuals come from
// per-sample oversmoothed fits at g = pilot_factor * h, resampled responses
// are recentered on the pooled oversmoothed fit (imposing the null), and
// each draw recomputes the studentized statistic at the original bandwidth.
// Conditional-mean problems only.
ComparatorReport wild_bootstrap(const Problem& p, const BootstrapPlan& plan, double h, const EstimatorSpec& spec);

// Without-replacement subsampling: each draw takes (b1, b2) rows from the
// two samples proportionally, recomputes the studentized statistic at the
// rescaled bandwidth, and compares |S*| against |S_n|.
ComparatorReport subsample(const Problem& p, const SubsamplePlan& plan, double h, const EstimatorSpec& spec);

}  // namespace permrate

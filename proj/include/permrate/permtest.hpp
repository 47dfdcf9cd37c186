#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "permrate/problem.hpp"

namespace permrate {

enum class StatKind { nonstudentized, studentized };
enum class PermMode { exhaustive, monte_carlo };

// How the permutation reference set is produced.  monte_carlo draws
// `draws` label reshuffles uniformly with replacement; exhaustive
// enumerates every ordering (guarded to n <= 10) and ignores the seed.
struct PermPlan {
  PermMode mode = PermMode::monte_carlo;
  std::uint64_t seed = 0;
  std::size_t draws = 999;
  bool conservative_ties = false;  // never reject on the tie branch
  int threads = 0;                 // 0 = runtime default
};

// Observed statistic with the per-sample estimates behind it.
struct StatResult {
  double t_n = 0.0;        // sqrt(n h) * (theta_1 - theta_2)
  double s_n = 0.0;        // t_n / sigma_hat (NaN if sigma degenerates)
  double sigma_hat2 = 0.0; // (n/n1) xi2_1 + (n/n2) xi2_2
  EstimateResult est1, est2;
  double value(StatKind kind) const { return kind == StatKind::studentized ? s_n : t_n; }
};

// Two-sided critical values from a sorted reference set: the order
// statistics at ranks floor(N a/2) and N - floor(N a/2), the counts
// beyond/at them, and the raw tie fraction a (unclamped so that the
// enumeration identity mean(phi) = alpha holds exactly).
struct CritValues {
  double lo = 0.0, hi = 0.0;
  double a_raw = 0.0;
  std::size_t k_lo = 0;
  std::size_t m_plus = 0, m_minus = 0, m_zero = 0;
  std::size_t n_ref = 0;
};

struct TestReport {
  StatKind kind = StatKind::studentized;
  double stat = 0.0;  // the statistic the test ranks (t_n or s_n)
  double t_n = 0.0;
  double s_n = 0.0;
  double sigma_hat2 = 0.0;
  double crit_lo = 0.0, crit_hi = 0.0;
  double a_frac = 0.0;  // tie-branch rejection probability, clamped to [0,1]
  double phi = 0.0;     // 0, a_frac, or 1
  double p_value = 1.0;
  double alpha = 0.0;
  std::size_t n_ref = 0;  // reference-set size (draws + observed, or n!)
  std::vector<double> perm_draws;
  EstimateResult est1, est2;
};

// Fills in the problem-kind-driven estimator fields (family and quantile
// level); other spec fields pass through unchanged.
EstimatorSpec resolved_spec(const Problem& p, EstimatorSpec spec);

// Observed statistic on the problem's own labels.
StatResult statistic(const Problem& p, double h, const EstimatorSpec& spec, StatKind kind);

// One recomputed statistic per permutation draw.  Failed draws (estimation
// errors inside a permuted window) are resampled with a fresh substream,
// capped at 10x the draw count.  Results depend only on (seed, draws,
// data), not on thread count or scheduling.
std::vector<double> perm_statistics(const Problem& p, const PermPlan& plan, double h, const EstimatorSpec& spec,
                                    StatKind kind);

// Single-threaded reference implementation with identical output; kept for
// differential testing and benchmarking against the parallel path.
std::vector<double> perm_statistics_serial(const Problem& p, const PermPlan& plan, double h,
                                           const EstimatorSpec& spec, StatKind kind);

// Both statistic scales of one permutation draw.
struct StatPair {
  double t_n = 0.0;
  double s_n = 0.0;
};

// One (t_n, s_n) pair per Monte Carlo draw, from a single pass over the
// reshuffles, for callers that rank the raw and the studentized statistic
// against the same reference set.  The draws match perm_statistics with the
// same plan.  Monte Carlo mode only.
std::vector<StatPair> perm_statistic_pairs(const Problem& p, const PermPlan& plan, double h,
                                           const EstimatorSpec& spec);

// Critical values and the randomized test function.
CritValues critical_values(std::span<const double> sorted_ref, double alpha);

// Three-branch randomized test: 1 beyond the critical order statistics,
// a_raw on ties, 0 between.  Uses the raw (unclamped) tie fraction.
double randomized_phi(double t, const CritValues& c);

// The rejection probability a test run assigns to an observed statistic:
// 1 strictly beyond the critical values, the clamped tie fraction on them
// (0 under conservative ties), 0 strictly inside.
double rejection_probability(double stat, const CritValues& c, bool conservative_ties);

// Full test: reference set, critical values, phi for the observed
// statistic, and a two-sided permutation p-value.
TestReport run_test(const Problem& p, const PermPlan& plan, double h, const EstimatorSpec& spec, StatKind kind,
                    double alpha);

// Empirical CDF of the reference draws at t.
double perm_cdf(std::span<const double> draws, double t);

}  // namespace permrate

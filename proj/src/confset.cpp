#include "permrate/confset.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "permrate/errors.hpp"
#include "permrate/kernel.hpp"
#include "permrate/rng.hpp"

namespace permrate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();


// Kernel mass around the discontinuity split by sign, on the original scale
// of the running variable (the second half is stored negated, so it is
// flipped back). Estimates the two side limits of the density; used only to
// centre and scale the ratio search grid, not for inference.
void edge_masses(const Problem& p, double h, const EstimatorSpec& spec, double& f_pos, double& f_neg) {
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i) {
    const double x = i < p.n1 ? p.x[i] : -p.x[i];
    const double w = kernel_value(spec.kernel, x / h);
    (x >= 0.0 ? pos : neg) += w;
  }
  const double n = static_cast<double>(p.n());
  f_pos = std::max(2.0 * pos / (n * h), spec.density_floor);
  f_neg = std::max(2.0 * neg / (n * h), spec.density_floor);
}

struct Hull {
  std::ptrdiff_t first = -1;  // grid indices of the in-block, -1 when empty
  std::ptrdiff_t last = -1;
  bool contiguous = true;
};

Hull scan(const std::vector<DeltaDecision>& grid, bool DeltaDecision::*member) {
  Hull h;
  std::size_t blocks = 0;
  bool prev = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool in = grid[i].*member;
    if (in) {
      if (h.first < 0) h.first = static_cast<std::ptrdiff_t>(i);
      h.last = static_cast<std::ptrdiff_t>(i);
      if (!prev) ++blocks;
    }
    prev = in;
  }
  h.contiguous = blocks <= 1;
  return h;
}

}  // namespace

ConfidenceSet invert(const Problem& p, const InvertPlan& plan, double h, const EstimatorSpec& spec) {
  if (plan.grid_points < 3 || plan.grid_points % 2 == 0)
    throw ConfigError("Grid size must be an odd number of at least three points.");
  if (!(plan.half_width > 0.0)) throw ConfigError("Grid half-width must be positive.");
  if (!(plan.alpha > 0.0 && plan.alpha < 1.0)) throw ConfigError("Alpha must lie strictly between 0 and 1.");

  const bool ratio_family = p.config.kind == ProblemKind::density_jump;
  const StatResult obs = statistic(p, h, spec, StatKind::studentized);
  const double rate = std::sqrt(static_cast<double>(p.n()) * h);
  const double sigma_hat = std::sqrt(obs.sigma_hat2);
  const double se = sigma_hat / rate;

  // Candidate grid. Mean-like families: additive, centred on the estimated
  // difference. Density: multiplicative, log-spaced, positive, and always
  // containing the no-jump ratio 1.
  const std::size_t g = plan.grid_points;
  std::vector<double> deltas(g);
  double center = 0.0;
  double tol = 0.0;
  if (!ratio_family) {
    center = obs.est1.theta - obs.est2.theta;
    const double width = plan.half_width * se;
    for (std::size_t i = 0; i < g; ++i)
      deltas[i] = center - width + 2.0 * width * static_cast<double>(i) / static_cast<double>(g - 1);
    deltas[(g - 1) / 2] = center;
    tol = se / 100.0;
  } else {
    double f_pos = 0.0, f_neg = 0.0;
    edge_masses(p, h, spec, f_pos, f_neg);
    center = f_pos / f_neg;
    const double rel_se = se * 0.5 * (1.0 / f_pos + 1.0 / f_neg);
    const double log_c = std::log(center);
    const double width = plan.half_width * rel_se;
    for (std::size_t i = 0; i < g; ++i)
      deltas[i] =
          std::exp(log_c - width + 2.0 * width * static_cast<double>(i) / static_cast<double>(g - 1));
    deltas[(g - 1) / 2] = center;
    tol = rel_se / 100.0;
    if (std::find(deltas.begin(), deltas.end(), 1.0) == deltas.end()) {
      deltas.push_back(1.0);
      std::sort(deltas.begin(), deltas.end());
    }
  }

  // Per-delta randomized rejection probability. Both modes share the plan's
  // seed; the transform mode re-runs the permutation test on transformed
  // data, the shift mode reuses one reference set of the original data.
  std::function<double(double)> phi_at;
  std::vector<double> ref;  // kept alive for the shift mode closure
  CritValues crits{};
  if (plan.mode == InvertMode::transform) {
    phi_at = [&p, &plan, h, &spec](double d) {
      return run_test(apply_delta(p, d), plan.perm, h, spec, StatKind::studentized, plan.alpha).phi;
    };
  } else {
    if (ratio_family)
      throw ConfigError("Statistic shifting needs an additive discrepancy; use the transform mode for density problems.");
    ref = perm_statistics(p, plan.perm, h, spec, StatKind::studentized);
    if (plan.perm.mode == PermMode::monte_carlo) ref.push_back(obs.s_n);
    std::sort(ref.begin(), ref.end());
    crits = critical_values(ref, plan.alpha);
    const double s_obs = obs.s_n;
    const bool conservative = plan.perm.conservative_ties;
    phi_at = [s_obs, rate, sigma_hat, crits, conservative](double d) {
      return rejection_probability(s_obs - rate * d / sigma_hat, crits, conservative);
    };
  }

  // One uniform per set, tied to the seed so the realized set is reproducible.
  SubstreamRng urng{plan.perm.seed, rng_purpose::kSetMembership};
  const double u = urng.next_uniform();

  ConfidenceSet out;
  out.level = 1.0 - plan.alpha;
  out.u = u;
  out.point_estimate = center;
  out.delta_tolerance = tol;
  out.grid.reserve(deltas.size());
  for (double d : deltas) {
    const double phi = phi_at(d);
    out.grid.push_back({d, phi, phi < 1.0, u > phi});
  }

  const Hull rand_hull = scan(out.grid, &DeltaDecision::in_randomized);
  const Hull cons_hull = scan(out.grid, &DeltaDecision::in_conservative);
  out.single_interval = rand_hull.contiguous && cons_hull.contiguous;
  out.all_included = cons_hull.first == 0 && cons_hull.last == static_cast<std::ptrdiff_t>(out.grid.size() - 1);

  // Bisection of a bracketed boundary: delta_in is inside the set, delta_out
  // outside; the gap shrinks below the tolerance (measured on the log scale
  // for ratios) and the midpoint is reported as the endpoint.
  const auto midpoint = [ratio_family](double a, double b) {
    return ratio_family ? std::sqrt(a * b) : 0.5 * (a + b);
  };
  const auto gap = [ratio_family](double a, double b) {
    return ratio_family ? std::abs(std::log(b) - std::log(a)) : std::abs(b - a);
  };
  const auto refine = [&](double delta_in, double delta_out, auto&& pred) {
    for (int step = 0; step < 60 && gap(delta_in, delta_out) > tol; ++step) {
      const double mid = midpoint(delta_in, delta_out);
      if (pred(phi_at(mid)))
        delta_in = mid;
      else
        delta_out = mid;
    }
    return midpoint(delta_in, delta_out);
  };
  const auto hull_bounds = [&](const Hull& hu, auto&& pred, double& lo, double& hi) {
    if (hu.first < 0) {
      lo = hi = kNaN;
      return;
    }
    const std::size_t f = static_cast<std::size_t>(hu.first);
    const std::size_t l = static_cast<std::size_t>(hu.last);
    lo = f == 0 ? out.grid.front().delta : refine(out.grid[f].delta, out.grid[f - 1].delta, pred);
    hi = l + 1 == out.grid.size() ? out.grid.back().delta
                                  : refine(out.grid[l].delta, out.grid[l + 1].delta, pred);
  };
  hull_bounds(rand_hull, [u](double phi) { return u > phi; }, out.lo, out.hi);
  hull_bounds(cons_hull, [](double phi) { return phi < 1.0; }, out.lo_conservative, out.hi_conservative);

  return out;
}

}  // namespace permrate

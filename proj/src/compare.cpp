#include "permrate/compare.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numeric>

#include <omp.h>

#include "permrate/rng.hpp"

namespace permrate {

namespace {

// Studentized statistic that degrades gracefully on degenerate data.
// Constant responses leave both the estimate difference and the
// matched-neighbor variances at roundoff scale, and dividing one roundoff
// quantity by another would manufacture an arbitrary finite value; a
// difference that is negligible at the scale of the estimates therefore
// reads as a zero statistic before any division happens.  A genuinely zero
// variance under a real difference is still a failure.
double studentized_or_zero(const Problem& p, double h, const EstimatorSpec& spec) {
  const StatResult r = statistic(p, h, spec, StatKind::nonstudentized);
  const double scale = std::max(1.0, std::abs(r.est1.theta) + std::abs(r.est2.theta));
  if (std::abs(r.est1.theta - r.est2.theta) <= 1e-9 * scale) return 0.0;
  if (std::isnan(r.s_n))
    throw DegenerateVarianceError("Pooled variance estimate is zero; cannot studentize.");
  return r.s_n;
}

// Shared draw loop: parallel over draws, per-draw retries on estimation
// errors capped at 10x the draw count, deterministic in the draw index.
template <typename DrawFn>
std::vector<double> run_draws(std::size_t B, int threads, DrawFn&& fn) {
  if (B == 0) throw ConfigError("Resampling draw count must be positive.");
  std::vector<double> out(B);
  const std::size_t retry_cap = 10 * B;
  std::atomic<std::size_t> retries{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::string err_what;

  auto one_draw = [&](std::size_t b) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      try {
        out[b] = fn(b, attempt);
        return;
      } catch (const EstimationError& ex) {
        if (retries.fetch_add(1, std::memory_order_relaxed) + 1 > retry_cap) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (err_what.empty()) err_what = ex.what();
          failed.store(true);
          return;
        }
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (err_what.empty()) err_what = ex.what();
        failed.store(true);
        return;
      }
    }
  };

  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(nthreads)
  for (long long b = 0; b < static_cast<long long>(B); ++b) {
    if (!failed.load(std::memory_order_relaxed)) one_draw(static_cast<std::size_t>(b));
  }
  if (failed.load())
    throw Error("Resampling reference set could not be completed: " +
                (err_what.empty() ? std::string("unknown estimation failure") : err_what));
  return out;
}

double upper_tail_fraction(const std::vector<double>& draws, double s_obs) {
  std::size_t count = 0;
  for (double d : draws)
    if (std::abs(d) >= std::abs(s_obs)) ++count;
  return static_cast<double>(count) / static_cast<double>(draws.size());
}

// Pilot fitted values at every canonical row of one response column:
// own-sample fits for residuals and a pooled fit to recenter on.
struct PilotFits {
  std::vector<double> pooled;    // pooled fit at each row's x
  std::vector<double> residual;  // y - own-sample fit at each row's x
};

PilotFits pilot_fits(const Problem& p, const std::vector<double>& resp, double g, const EstimatorSpec& spec) {
  const std::size_t n = p.n();
  const std::size_t pilot_min = static_cast<std::size_t>(spec.order + 2);

  // Sorted copies: each sample alone plus the pooled rows.
  auto sorted_ids = [](std::size_t lo, std::size_t hi, const std::vector<double>& xs) {
    std::vector<std::uint32_t> ids(hi - lo);
    std::iota(ids.begin(), ids.end(), static_cast<std::uint32_t>(lo));
    std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (xs[a] != xs[b]) return xs[a] < xs[b];
      return a < b;
    });
    return ids;
  };
  auto gather = [&](const std::vector<std::uint32_t>& ids, const std::vector<double>& src) {
    std::vector<double> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = src[ids[i]];
    return out;
  };

  const std::vector<std::uint32_t> id1 = sorted_ids(0, p.n1, p.x);
  const std::vector<std::uint32_t> id2 = sorted_ids(p.n1, n, p.x);
  std::vector<std::uint32_t> idp(n);
  std::iota(idp.begin(), idp.end(), 0u);
  std::sort(idp.begin(), idp.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (p.x[a] != p.x[b]) return p.x[a] < p.x[b];
    return a < b;
  });
  const std::vector<double> x1 = gather(id1, p.x), y1 = gather(id1, resp);
  const std::vector<double> x2 = gather(id2, p.x), y2 = gather(id2, resp);
  const std::vector<double> xp = gather(idp, p.x), yp = gather(idp, resp);

  PilotFits f;
  f.pooled.resize(n);
  f.residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = p.x[i];
    const bool first = i < p.n1;
    const LprFit own = lpr_fit(first ? x1 : x2, first ? y1 : y2, xi, g, spec.kernel, spec.order,
                               EvalSide::interior, pilot_min);
    const LprFit pool = lpr_fit(xp, yp, xi, g, spec.kernel, spec.order, EvalSide::interior, pilot_min);
    f.residual[i] = resp[i] - own.beta[0];
    f.pooled[i] = pool.beta[0];
  }
  return f;
}

}  // namespace

ComparatorReport t_test(double s_n, double alpha) {
  if (!std::isfinite(s_n)) throw ConfigError("The studentized statistic must be finite.");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("Alpha must lie in (0, 1).");
  ComparatorReport r;
  r.method = ComparatorMethod::t_test;
  r.stat = s_n;
  r.p_value = std::min(1.0, std::erfc(std::abs(s_n) / std::sqrt(2.0)));
  r.reject_05 = r.p_value < 0.05;
  return r;
}

ComparatorReport wild_bootstrap(const Problem& p, const BootstrapPlan& plan, double h, const EstimatorSpec& spec) {
  const EstimatorSpec rspec = resolved_spec(p, spec);
  if (rspec.family != Family::local_mean)
    throw ConfigError("Wild bootstrap supports conditional-mean problems only.");
  if (!(plan.pilot_factor > 1.0)) throw ConfigError("Pilot factor must oversmooth (exceed 1).");
  const double g = plan.pilot_factor * h;

  const double s_obs = studentized_or_zero(p, h, rspec);
  const PilotFits fy = pilot_fits(p, p.y, g, rspec);
  const bool ratio = p.config.kind == ProblemKind::two_sample_ratio;
  PilotFits fd;
  if (ratio) fd = pilot_fits(p, p.y2, g, rspec);

  const std::size_t n = p.n();
  std::vector<double> draws = run_draws(plan.draws, plan.threads, [&](std::size_t b, std::uint64_t attempt) {
    thread_local Problem ps;
    ps = p;
    SubstreamRng rng{plan.seed, rng_purpose::kBootstrapWeights, static_cast<std::uint64_t>(b), attempt};
    for (std::size_t i = 0; i < n; ++i) {
      const double w = rng.next_sign();
      ps.y[i] = fy.pooled[i] + w * fy.residual[i];
      if (ratio) ps.y2[i] = fd.pooled[i] + w * fd.residual[i];
    }
    return studentized_or_zero(ps, h, rspec);
  });

  ComparatorReport r;
  r.method = ComparatorMethod::wild_bootstrap;
  r.stat = s_obs;
  r.pilot_g = g;
  r.p_value = upper_tail_fraction(draws, s_obs);
  r.reject_05 = r.p_value < 0.05;
  r.draws = std::move(draws);
  return r;
}

ComparatorReport subsample(const Problem& p, const SubsamplePlan& plan, double h, const EstimatorSpec& spec) {
  const EstimatorSpec rspec = resolved_spec(p, spec);
  const std::size_t n = p.n(), n1 = p.n1, n2 = p.n2();

  std::size_t b_total = plan.block;
  if (b_total == 0) b_total = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0)));

  // Per-sample floor: enough rows to support the (possibly order-bumped)
  // local fit with a little slack.
  std::size_t floor_k = 8;
  if (rspec.family == Family::local_mean) {
    const int bump = (rspec.bias == BiasMode::order_bump)
                         ? ((p.side == EvalSide::interior && rspec.order % 2 == 0) ? 2 : 1)
                         : 0;
    floor_k = std::max<std::size_t>(static_cast<std::size_t>(rspec.order + bump + 2), 8);
  }

  const double lambda = static_cast<double>(n1) / static_cast<double>(n);
  std::size_t b1 = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(b_total)));
  b1 = std::max(b1, floor_k);
  std::size_t b2 = (b_total > b1) ? b_total - b1 : 0;
  b2 = std::max(b2, floor_k);
  if (b1 >= n1 || b2 >= n2)
    throw DegenerateSubsampleError("Subsample sizes must be smaller than both samples; got " + std::to_string(b1) +
                                   "/" + std::to_string(n1) + " and " + std::to_string(b2) + "/" +
                                   std::to_string(n2) + ".");
  b_total = b1 + b2;
  const double h_b = h * std::pow(static_cast<double>(n) / static_cast<double>(b_total), plan.bandwidth_exponent);

  const double s_obs = studentized_or_zero(p, h, rspec);
  const bool has_y = !p.y.empty(), has_d = !p.y2.empty();

  std::vector<double> draws = run_draws(plan.draws, plan.threads, [&](std::size_t b, std::uint64_t attempt) {
    thread_local std::vector<std::uint32_t> rows1, rows2;
    thread_local Problem ps;
    SubstreamRng rng{plan.seed, rng_purpose::kSubsample, static_cast<std::uint64_t>(b), attempt};

    auto pick = [&](std::vector<std::uint32_t>& rows, std::size_t lo, std::size_t count, std::size_t take) {
      rows.resize(count);
      std::iota(rows.begin(), rows.end(), static_cast<std::uint32_t>(lo));
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(count - i));
        std::swap(rows[i], rows[j]);
      }
      rows.resize(take);
    };
    pick(rows1, 0, n1, b1);
    pick(rows2, n1, n2, b2);

    ps.config = p.config;
    ps.eval_x = p.eval_x;
    ps.side = p.side;
    ps.n1 = b1;
    ps.x.clear();
    ps.y.clear();
    ps.y2.clear();
    ps.labels.assign(b_total, 2);
    std::fill(ps.labels.begin(), ps.labels.begin() + static_cast<std::ptrdiff_t>(b1), 1);
    for (const auto* rows : {&rows1, &rows2})
      for (std::uint32_t i : *rows) {
        ps.x.push_back(p.x[i]);
        if (has_y) ps.y.push_back(p.y[i]);
        if (has_d) ps.y2.push_back(p.y2[i]);
      }
    return studentized_or_zero(ps, h_b, rspec);
  });

  ComparatorReport r;
  r.method = ComparatorMethod::subsample;
  r.stat = s_obs;
  r.h_used = h_b;
  r.b1 = b1;
  r.b2 = b2;
  r.p_value = upper_tail_fraction(draws, s_obs);
  r.reject_05 = r.p_value < 0.05;
  r.draws = std::move(draws);
  return r;
}

}  // namespace permrate

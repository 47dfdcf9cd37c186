#include "permrate/permtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <numeric>

#include <omp.h>

#include "permrate/rng.hpp"

namespace permrate {

namespace {

constexpr double kDenomEps = 1e-12;

// Immutable per-problem precomputation shared by every draw: the canonical
// rows sorted once globally (by x, or by |x| for density problems).  Each
// permutation then splits this order into two already-sorted samples with a
// single linear membership walk.
struct EngineData {
  const Problem* p = nullptr;
  EstimatorSpec spec;
  StatKind kind = StatKind::studentized;
  double h = 0.0;
  double sqrt_nh = 0.0;
  bool ratio = false;
  bool density = false;
  std::vector<double> gx, gy, gd;
  std::vector<std::uint32_t> gids;
};

// Per-thread scratch reused across draws.
struct Workspace {
  std::vector<std::uint32_t> idx;
  std::vector<std::uint8_t> member1;
  std::vector<double> x1, y1, d1, x2, y2, d2;
  std::vector<std::uint32_t> id1, id2;

  void init(std::size_t n) {
    idx.resize(n);
    member1.assign(n, 0);
    for (auto* v : {&x1, &y1, &d1, &x2, &y2, &d2}) v->reserve(n);
    id1.reserve(n);
    id2.reserve(n);
  }
};

EngineData prepare(const Problem& p, double h, const EstimatorSpec& spec, StatKind kind) {
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  EngineData e;
  e.p = &p;
  e.spec = resolved_spec(p, spec);
  e.kind = kind;
  e.h = h;
  e.sqrt_nh = std::sqrt(static_cast<double>(p.n()) * h);
  e.ratio = p.config.kind == ProblemKind::two_sample_ratio;
  e.density = p.config.kind == ProblemKind::density_jump;

  const std::size_t n = p.n();
  e.gids.resize(n);
  std::iota(e.gids.begin(), e.gids.end(), 0u);
  if (e.density) {
    std::sort(e.gids.begin(), e.gids.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double da = std::abs(p.x[a]), db = std::abs(p.x[b]);
      if (da != db) return da < db;
      return a < b;
    });
  } else {
    std::sort(e.gids.begin(), e.gids.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (p.x[a] != p.x[b]) return p.x[a] < p.x[b];
      return a < b;
    });
  }
  e.gx.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.gx[i] = p.x[e.gids[i]];
  if (!p.y.empty()) {
    e.gy.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.gy[i] = p.y[e.gids[i]];
  }
  if (e.ratio) {
    e.gd.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.gd[i] = p.y2[e.gids[i]];
  }
  return e;
}

// Delta-method combination for the ratio of two conditional means.
EstimateResult ratio_combine(const EstimateResult& num, const EstimateResult& den) {
  if (std::abs(den.theta) <= kDenomEps || std::abs(den.theta_raw) <= kDenomEps)
    throw VarianceUnstableError("Denominator mean is numerically zero in the ratio estimate.");
  EstimateResult out = num;
  const double d = den.theta, d2 = d * d;
  out.theta = num.theta / d;
  out.theta_raw = num.theta_raw / den.theta_raw;
  out.bias_hat = 0.0;  // folded into the two component estimates
  out.xi2 = num.xi2 / d2 + num.theta * num.theta * den.xi2 / (d2 * d2);
  if (!std::isfinite(out.theta) || !std::isfinite(out.xi2))
    throw VarianceUnstableError("Ratio estimate came out non-finite.");
  return out;
}

EstimateResult sample_estimate(const EngineData& e, std::span<const double> x, std::span<const double> y,
                               std::span<const double> d, std::span<const std::uint32_t> ids) {
  const EvalPoint at{e.p->eval_x, e.p->side};
  if (e.ratio) {
    const EstimateResult num = estimate(SortedView{x, y, ids, {}}, at, e.h, e.spec);
    const EstimateResult den = estimate(SortedView{x, d, ids, {}}, at, e.h, e.spec);
    return ratio_combine(num, den);
  }
  return estimate(SortedView{x, y, ids, {}}, at, e.h, e.spec);
}

// Statistic for the sample-1 membership currently flagged in ws.member1.
StatResult compute_split(const EngineData& e, Workspace& ws) {
  ws.x1.clear();
  ws.y1.clear();
  ws.d1.clear();
  ws.id1.clear();
  ws.x2.clear();
  ws.y2.clear();
  ws.d2.clear();
  ws.id2.clear();
  const std::size_t n = e.gx.size();
  const bool has_y = !e.gy.empty();
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t id = e.gids[k];
    if (ws.member1[id]) {
      ws.x1.push_back(e.gx[k]);
      if (has_y) ws.y1.push_back(e.gy[k]);
      if (e.ratio) ws.d1.push_back(e.gd[k]);
      ws.id1.push_back(id);
    } else {
      ws.x2.push_back(e.gx[k]);
      if (has_y) ws.y2.push_back(e.gy[k]);
      if (e.ratio) ws.d2.push_back(e.gd[k]);
      ws.id2.push_back(id);
    }
  }

  StatResult r;
  r.est1 = sample_estimate(e, ws.x1, ws.y1, ws.d1, ws.id1);
  r.est2 = sample_estimate(e, ws.x2, ws.y2, ws.d2, ws.id2);
  r.t_n = e.sqrt_nh * (r.est1.theta - r.est2.theta);
  const double n_total = static_cast<double>(e.p->n());
  const double n1 = static_cast<double>(e.p->n1);
  const double n2 = static_cast<double>(e.p->n2());
  r.sigma_hat2 = (n_total / n1) * r.est1.xi2 + (n_total / n2) * r.est2.xi2;
  if (r.sigma_hat2 > 0.0) {
    r.s_n = r.t_n / std::sqrt(r.sigma_hat2);
  } else if (e.kind == StatKind::studentized) {
    throw DegenerateVarianceError("Pooled variance estimate is zero; cannot studentize.");
  } else {
    r.s_n = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

void set_observed_membership(const Problem& p, Workspace& ws) {
  std::memset(ws.member1.data(), 0, ws.member1.size());
  for (std::size_t i = 0; i < p.n1; ++i) ws.member1[i] = 1;
}

// All n! orderings.  A split's statistic depends only on which ids land in
// sample 1, so evaluations are cached per membership bitmask; the output
// still lists one entry per ordering, which is what the exact-size
// enumeration identity weighs.  Estimation errors here are fatal: an
// enumerated ordering cannot be resampled.
std::vector<double> exhaustive_statistics(const EngineData& e) {
  const std::size_t n = e.p->n();
  if (n > 10) throw ConfigError("Exhaustive enumeration supports at most 10 observations.");
  std::size_t total = 1;
  for (std::size_t i = 2; i <= n; ++i) total *= i;

  Workspace ws;
  ws.init(n);
  std::vector<double> cache(std::size_t{1} << n, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> out;
  out.reserve(total);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  do {
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < e.p->n1; ++i) mask |= 1u << idx[i];
    double v = cache[mask];
    if (std::isnan(v)) {
      std::memset(ws.member1.data(), 0, ws.member1.size());
      for (std::size_t i = 0; i < e.p->n1; ++i) ws.member1[idx[i]] = 1;
      v = compute_split(e, ws).value(e.kind);
      cache[mask] = v;
    }
    out.push_back(v);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

template <class T, class Extract>
std::vector<T> monte_carlo_draws(const EngineData& e, const PermPlan& plan, bool parallel, Extract extract) {
  const std::size_t B = plan.draws;
  if (B == 0) throw ConfigError("Monte Carlo permutation count must be positive.");
  const std::size_t n = e.p->n();
  std::vector<T> out(B);

  const std::size_t retry_cap = 10 * B;
  std::atomic<std::size_t> retries{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::string err_what;

  auto record_failure = [&](const std::exception& ex) {
    std::lock_guard<std::mutex> lock(err_mutex);
    if (err_what.empty()) err_what = ex.what();
    failed.store(true);
  };

  auto one_draw = [&](std::size_t b, Workspace& ws) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      try {
        SubstreamRng rng{plan.seed, rng_purpose::kPermutation, static_cast<std::uint64_t>(b), attempt};
        std::iota(ws.idx.begin(), ws.idx.end(), 0u);
        shuffle(ws.idx.data(), ws.idx.size(), rng);
        std::memset(ws.member1.data(), 0, ws.member1.size());
        for (std::size_t i = 0; i < e.p->n1; ++i) ws.member1[ws.idx[i]] = 1;
        out[b] = extract(compute_split(e, ws));
        return;
      } catch (const EstimationError& ex) {
        // Degenerate window under this reshuffle: resample with a fresh
        // substream, up to a global cap so a hopeless problem cannot spin.
        if (retries.fetch_add(1, std::memory_order_relaxed) + 1 > retry_cap) {
          record_failure(ex);
          return;
        }
      } catch (const std::exception& ex) {
        record_failure(ex);
        return;
      }
    }
  };

  if (parallel) {
    const int threads = plan.threads > 0 ? plan.threads : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
      Workspace ws;
      ws.init(n);
#pragma omp for schedule(dynamic, 16)
      for (long long b = 0; b < static_cast<long long>(B); ++b) {
        if (!failed.load(std::memory_order_relaxed)) one_draw(static_cast<std::size_t>(b), ws);
      }
    }
  } else {
    Workspace ws;
    ws.init(n);
    for (std::size_t b = 0; b < B; ++b) {
      if (failed.load(std::memory_order_relaxed)) break;
      one_draw(b, ws);
    }
  }

  if (failed.load())
    throw Error("Permutation reference set could not be completed: " +
                (err_what.empty() ? std::string("unknown estimation failure") : err_what));
  return out;
}

std::vector<double> monte_carlo_statistics(const EngineData& e, const PermPlan& plan, bool parallel) {
  const StatKind kind = e.kind;
  return monte_carlo_draws<double>(e, plan, parallel, [kind](const StatResult& r) { return r.value(kind); });
}

std::vector<double> perm_statistics_impl(const Problem& p, const PermPlan& plan, double h,
                                         const EstimatorSpec& spec, StatKind kind, bool parallel) {
  const EngineData e = prepare(p, h, spec, kind);
  if (plan.mode == PermMode::exhaustive) return exhaustive_statistics(e);
  return monte_carlo_statistics(e, plan, parallel);
}

}  // namespace

EstimatorSpec resolved_spec(const Problem& p, EstimatorSpec spec) {
  switch (p.config.kind) {
    case ProblemKind::two_sample_mean:
    case ProblemKind::two_sample_ratio:
    case ProblemKind::rdd_mean:
      spec.family = Family::local_mean;
      break;
    case ProblemKind::two_sample_quantile:
      spec.family = Family::local_quantile;
      spec.quantile = p.config.quantile;
      break;
    case ProblemKind::density_jump:
      spec.family = Family::density_edge;
      break;
  }
  return spec;
}

StatResult statistic(const Problem& p, double h, const EstimatorSpec& spec, StatKind kind) {
  const EngineData e = prepare(p, h, spec, kind);
  Workspace ws;
  ws.init(p.n());
  set_observed_membership(p, ws);
  return compute_split(e, ws);
}

std::vector<double> perm_statistics(const Problem& p, const PermPlan& plan, double h, const EstimatorSpec& spec,
                                    StatKind kind) {
  return perm_statistics_impl(p, plan, h, spec, kind, true);
}

std::vector<double> perm_statistics_serial(const Problem& p, const PermPlan& plan, double h,
                                           const EstimatorSpec& spec, StatKind kind) {
  return perm_statistics_impl(p, plan, h, spec, kind, false);
}

std::vector<StatPair> perm_statistic_pairs(const Problem& p, const PermPlan& plan, double h,
                                           const EstimatorSpec& spec) {
  if (plan.mode != PermMode::monte_carlo)
    throw ConfigError("Paired draws are Monte Carlo only; enumerate each statistic kind separately.");
  // Studentized preparation so draws with a degenerate variance are
  // resampled: both scales must be usable in every returned pair.
  const EngineData e = prepare(p, h, spec, StatKind::studentized);
  return monte_carlo_draws<StatPair>(e, plan, true, [](const StatResult& r) { return StatPair{r.t_n, r.s_n}; });
}

CritValues critical_values(std::span<const double> sorted_ref, double alpha) {
  if (sorted_ref.empty()) throw ConfigError("Reference set is empty.");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("Alpha must lie in (0, 1).");
  CritValues c;
  const std::size_t n = sorted_ref.size();
  c.n_ref = n;
  c.k_lo = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) / 2.0));
  const std::size_t k_hi = n - c.k_lo;
  c.hi = sorted_ref[k_hi - 1];
  c.lo = (c.k_lo > 0) ? sorted_ref[c.k_lo - 1] : -std::numeric_limits<double>::infinity();

  const auto* begin = sorted_ref.data();
  const auto* end = begin + n;
  c.m_plus = static_cast<std::size_t>(end - std::upper_bound(begin, end, c.hi));
  c.m_zero = static_cast<std::size_t>(std::upper_bound(begin, end, c.hi) - std::lower_bound(begin, end, c.hi));
  if (c.k_lo > 0) {
    c.m_minus = static_cast<std::size_t>(std::lower_bound(begin, end, c.lo) - begin);
    if (c.lo < c.hi)
      c.m_zero += static_cast<std::size_t>(std::upper_bound(begin, end, c.lo) - std::lower_bound(begin, end, c.lo));
  }
  c.a_raw = (alpha * static_cast<double>(n) - static_cast<double>(c.m_plus) - static_cast<double>(c.m_minus)) /
            static_cast<double>(c.m_zero);
  return c;
}

double randomized_phi(double t, const CritValues& c) {
  if (t > c.hi || t < c.lo) return 1.0;
  if (t == c.hi || (c.k_lo > 0 && t == c.lo)) return c.a_raw;
  return 0.0;
}

double rejection_probability(double stat, const CritValues& c, bool conservative_ties) {
  if (stat > c.hi || stat < c.lo) return 1.0;
  if (stat == c.hi || (c.k_lo > 0 && stat == c.lo))
    return conservative_ties ? 0.0 : std::clamp(c.a_raw, 0.0, 1.0);
  return 0.0;
}

TestReport run_test(const Problem& p, const PermPlan& plan, double h, const EstimatorSpec& spec, StatKind kind,
                    double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("Alpha must lie in (0, 1).");
  const StatResult obs = statistic(p, h, spec, kind);
  std::vector<double> draws = perm_statistics(p, plan, h, spec, kind);

  TestReport r;
  r.kind = kind;
  r.stat = obs.value(kind);
  r.t_n = obs.t_n;
  r.s_n = obs.s_n;
  r.sigma_hat2 = obs.sigma_hat2;
  r.est1 = obs.est1;
  r.est2 = obs.est2;
  r.alpha = alpha;

  std::vector<double> ref = draws;
  if (plan.mode == PermMode::monte_carlo) ref.push_back(r.stat);  // N = B + 1
  std::sort(ref.begin(), ref.end());
  const CritValues c = critical_values(ref, alpha);
  r.crit_lo = c.lo;
  r.crit_hi = c.hi;
  r.n_ref = c.n_ref;
  r.a_frac = std::clamp(c.a_raw, 0.0, 1.0);
  r.phi = rejection_probability(r.stat, c, plan.conservative_ties);

  // Two-sided tail fraction.  Monte Carlo mode counts the sampled draws
  // only, so an observed statistic beyond every draw reports p = 0;
  // exhaustive mode counts the full enumeration (which already contains
  // the observed value via the identity ordering).
  const std::vector<double>& pool = (plan.mode == PermMode::monte_carlo) ? draws : ref;
  std::size_t le = 0, ge = 0;
  for (double v : pool) {
    if (v <= r.stat) ++le;
    if (v >= r.stat) ++ge;
  }
  const double denom = static_cast<double>(pool.size());
  r.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / denom);
  r.perm_draws = std::move(draws);
  return r;
}

double perm_cdf(std::span<const double> draws, double t) {
  if (draws.empty()) throw ConfigError("Reference set is empty.");
  std::size_t le = 0;
  for (double v : draws)
    if (v <= t) ++le;
  return static_cast<double>(le) / static_cast<double>(draws.size());
}

}  // namespace permrate

#include "permrate/problem.hpp"

#include <algorithm>
#include <cmath>

namespace permrate {

namespace {

void require_finite(std::span<const double> v, const char* name) {
  for (double value : v)
    if (!std::isfinite(value)) throw ConfigError(std::string(name) + " column contains a non-finite value.");
}

}  // namespace

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "two-sample-mean") return ProblemKind::two_sample_mean;
  if (s == "two-sample-quantile") return ProblemKind::two_sample_quantile;
  if (s == "two-sample-ratio") return ProblemKind::two_sample_ratio;
  if (s == "rdd") return ProblemKind::rdd_mean;
  if (s == "density") return ProblemKind::density_jump;
  throw ConfigError("Unknown problem kind '" + s + "'.");
}

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::two_sample_mean:
      return "two-sample-mean";
    case ProblemKind::two_sample_quantile:
      return "two-sample-quantile";
    case ProblemKind::two_sample_ratio:
      return "two-sample-ratio";
    case ProblemKind::rdd_mean:
      return "rdd";
    case ProblemKind::density_jump:
      return "density";
  }
  return "unknown";
}

Problem build_problem(const ProblemConfig& config, std::span<const double> x, std::span<const double> y,
                      std::span<const double> y2, std::span<const int> groups) {
  if (x.empty()) throw ConfigError("Cannot build a problem from an empty regressor column.");
  require_finite(x, "regressor");
  require_finite(y, "response");
  require_finite(y2, "second response");

  Problem p;
  p.config = config;
  const std::size_t n = x.size();
  p.labels.resize(n);

  switch (config.kind) {
    case ProblemKind::two_sample_mean:
    case ProblemKind::two_sample_quantile:
    case ProblemKind::two_sample_ratio: {
      if (y.size() != n) throw ConfigError("Response column length does not match the regressor column.");
      if (groups.size() != n) throw ConfigError("Two-sample problems need a group column of matching length.");
      const bool ratio = config.kind == ProblemKind::two_sample_ratio;
      if (ratio && y2.size() != n)
        throw ConfigError("Ratio problems need a second response column of matching length.");
      if (config.kind == ProblemKind::two_sample_quantile && (config.quantile <= 0.0 || config.quantile >= 1.0))
        throw ConfigError("Quantile level must lie in (0, 1).");
      std::size_t n1 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (groups[i] != 1 && groups[i] != 2) throw ConfigError("Group column values must be 1 or 2.");
        p.labels[i] = static_cast<std::uint8_t>(groups[i]);
        if (groups[i] == 1) ++n1;
      }
      if (n1 == 0 || n1 == n) throw DegenerateSplitError("Both samples need at least one observation.");
      p.n1 = n1;
      p.x.reserve(n);
      p.y.reserve(n);
      if (ratio) p.y2.reserve(n);
      for (int pass : {1, 2}) {
        for (std::size_t i = 0; i < n; ++i) {
          if (groups[i] != pass) continue;
          p.x.push_back(x[i]);
          p.y.push_back(y[i]);
          if (ratio) p.y2.push_back(y2[i]);
        }
      }
      p.eval_x = config.point;
      p.side = EvalSide::interior;
      break;
    }
    case ProblemKind::rdd_mean: {
      if (y.size() != n) throw ConfigError("Response column length does not match the regressor column.");
      std::size_t n1 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        // Observations exactly at the cutoff count as treated (sample 1).
        p.labels[i] = (x[i] >= config.point) ? 1 : 2;
        if (p.labels[i] == 1) ++n1;
      }
      if (n1 == 0 || n1 == n)
        throw DegenerateSplitError("The cutoff must have observations on both sides.");
      p.n1 = n1;
      p.x.reserve(n);
      p.y.reserve(n);
      for (int pass : {1, 2}) {
        for (std::size_t i = 0; i < n; ++i) {
          if (p.labels[i] != pass) continue;
          const double d = x[i] - config.point;
          p.x.push_back(pass == 1 ? d : -d);  // reflect the left side
          p.y.push_back(y[i]);
        }
      }
      p.eval_x = 0.0;
      p.side = EvalSide::boundary_right;
      break;
    }
    case ProblemKind::density_jump: {
      const std::size_t n1 = n / 2;
      if (n1 == 0) throw DegenerateSplitError("Density problems need at least two observations.");
      p.n1 = n1;
      p.x.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        p.labels[i] = (i < n1) ? 1 : 2;
        const double d = x[i] - config.point;
        p.x.push_back(i < n1 ? d : -d);  // negate the second half
      }
      p.eval_x = 0.0;
      p.side = EvalSide::interior;
      break;
    }
  }
  return p;
}

Problem apply_delta(const Problem& p, double delta) {
  if (p.config.kind == ProblemKind::density_jump && delta <= 0.0)
    throw InvalidDeltaError("Density ratio deltas must be positive.");
  if (delta == p.delta0()) return p;

  Problem out = p;
  switch (p.config.kind) {
    case ProblemKind::two_sample_mean:
    case ProblemKind::two_sample_quantile:
    case ProblemKind::rdd_mean:
      for (std::size_t i = 0; i < p.n1; ++i) out.y[i] -= delta;
      break;
    case ProblemKind::two_sample_ratio:
      // Shifting the numerator by delta times the denominator shifts the
      // ratio parameter by exactly delta.
      for (std::size_t i = 0; i < p.n1; ++i) out.y[i] -= delta * p.y2[i];
      break;
    case ProblemKind::density_jump:
      for (std::size_t i = 0; i < p.n1; ++i) out.x[i] *= (p.x[i] >= 0.0) ? delta : 1.0 / delta;
      break;
  }
  return out;
}

}  // namespace permrate

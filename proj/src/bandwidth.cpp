#include "permrate/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace permrate {

namespace {

// Unweighted polynomial least squares on rows [lo, hi) of (t, y), with the
// regressor mapped through `transform` and divided by `scale` before the
// powers are formed.  Returns the coefficient vector in scaled coordinates.
Eigen::VectorXd poly_ols(const std::vector<double>& t, const std::vector<double>& y, std::size_t lo, std::size_t hi,
                         int degree, bool jump_column, double scale) {
  const std::size_t m = hi - lo;
  const int k = degree + 1 + (jump_column ? 1 : 0);
  Eigen::MatrixXd a(m, k);
  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = t[lo + i] / scale;
    int col = 0;
    a(i, col++) = 1.0;
    if (jump_column) a(i, col++) = t[lo + i] >= 0.0 ? 1.0 : 0.0;
    double power = 1.0;
    for (int d = 1; d <= degree; ++d) {
      power *= u;
      a(i, col++) = power;
    }
    b(i) = y[lo + i];
  }
  const auto qr = a.colPivHouseholderQr();
  if (qr.rank() < k)
    throw BandwidthError("Polynomial pilot fit is rank deficient; too few distinct regressor values in the window.");
  Eigen::VectorXd beta = qr.solve(b);
  if (!beta.allFinite()) throw BandwidthError("Polynomial pilot fit produced non-finite coefficients.");
  return beta;
}

double median_of_sorted(const double* begin, std::size_t count) {
  const std::size_t mid = count / 2;
  return count % 2 == 1 ? begin[mid] : 0.5 * (begin[mid - 1] + begin[mid]);
}

struct SideWindow {
  double h = 0.0;          // window half-width actually used
  double curvature = 0.0;  // second derivative from the one-sided quadratic
  double regularizer = 0.0;
  std::size_t count = 0;
};

}  // namespace

BandwidthChoice fixed_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  BandwidthChoice out;
  out.value = h;
  out.rule = BandwidthRule::fixed;
  return out;
}

double plug_in_constant(KernelId kernel, EvalSide side) {
  const MomentSide moments = side == EvalSide::boundary_right ? MomentSide::positive : MomentSide::full;
  const PolyMatrices& pm = poly_matrices(kernel, 1, moments);
  return std::pow(pm.variance_factor / (pm.bias_factor * pm.bias_factor), 0.2);
}

BandwidthChoice ik_bandwidth(const Problem& p, KernelId kernel, const IkConstants& constants) {
  if (p.config.kind == ProblemKind::density_jump)
    throw ConfigError("The data-driven bandwidth rule fits regression curves; density problems take a fixed bandwidth.");
  if (!(constants.pilot_factor > 0.0) || !(constants.curvature_factor > 0.0) || !(constants.regularizer_factor >= 0.0))
    throw ConfigError("Bandwidth rule factors must be positive (the regularizer may be zero).");
  if (constants.curvature_min_window < 3 || constants.min_side < constants.curvature_min_window)
    throw ConfigError("Bandwidth rule windows need at least three observations, and min_side at least that many.");

  // Signed distances from the evaluation point, in original regressor
  // coordinates: the reflected cutoff sample is un-reflected so the two
  // sides of the point land on the two signs.
  const std::size_t n = p.n();
  const bool cutoff = p.config.kind == ProblemKind::rdd_mean;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = cutoff ? (i < p.n1 ? p.x[i] : -p.x[i]) : p.x[i] - p.eval_x;
  }
  std::stable_sort(idx.begin(), idx.end(), [&raw](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  std::vector<double> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = raw[idx[i]];
    y[i] = p.y[idx[i]];  // ratio problems pilot on the numerator response
  }

  const std::size_t split = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), 0.0) - t.begin());
  const std::size_t n_left = split;
  const std::size_t n_right = n - split;
  if (n_left < constants.min_side || n_right < constants.min_side)
    throw BandwidthError("Bandwidth rule needs at least " + std::to_string(constants.min_side) +
                         " observations on each side of the evaluation point.");

  const double nn = static_cast<double>(n);
  const double t_mean = std::accumulate(t.begin(), t.end(), 0.0) / nn;
  double t_ssq = 0.0;
  for (double v : t) t_ssq += (v - t_mean) * (v - t_mean);
  const double t_sd = std::sqrt(t_ssq / (nn - 1.0));
  if (!(t_sd > 0.0)) throw BandwidthError("Regressor values are constant; the pilot window is degenerate.");

  BandwidthChoice out;
  out.rule = BandwidthRule::ik_llr;
  out.small_sample_warning = n < constants.small_sample;

  // Stage 1: pilot window around the point, at least two observations per
  // side, giving the local density and the pooled residual variance.
  double h1 = constants.pilot_factor * t_sd * std::pow(nn, -0.2);
  h1 = std::max(h1, std::max(-t[split - 2], t[split + 1]));
  const std::size_t lo1 = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), -h1) - t.begin());
  const std::size_t hi1 = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), h1) - t.begin());
  const std::size_t nl1 = split - lo1;
  const std::size_t nr1 = hi1 - split;
  double mean_l = 0.0, mean_r = 0.0;
  for (std::size_t i = lo1; i < split; ++i) mean_l += y[i];
  for (std::size_t i = split; i < hi1; ++i) mean_r += y[i];
  mean_l /= static_cast<double>(nl1);
  mean_r /= static_cast<double>(nr1);
  double ssq = 0.0;
  for (std::size_t i = lo1; i < hi1; ++i) {
    const double d = y[i] - (i < split ? mean_l : mean_r);
    ssq += d * d;
  }
  out.pilot_h = h1;
  out.density_at_point = static_cast<double>(nl1 + nr1) / (2.0 * nn * h1);
  out.variance_at_point = ssq / static_cast<double>(nl1 + nr1);
  if (!(out.variance_at_point > 0.0))
    throw BandwidthError("Responses are constant in the pilot window; the plug-in rule is degenerate.");

  // Stage 2a: third derivative from a global cubic (with a level shift at
  // the point) fitted between the side medians, where leverage is tame.
  const double med_l = median_of_sorted(t.data(), n_left);
  const double med_r = median_of_sorted(t.data() + split, n_right);
  std::size_t lo3 = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), med_l) - t.begin());
  std::size_t hi3 = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), med_r) - t.begin());
  if (hi3 - lo3 < 6) {
    lo3 = 0;
    hi3 = n;
  }
  const Eigen::VectorXd cubic = poly_ols(t, y, lo3, hi3, 3, true, t_sd);
  out.third_derivative = 6.0 * cubic(4) / (t_sd * t_sd * t_sd);

  // Stage 2b: one-sided quadratic windows sized by the third derivative,
  // clamped into the data range and widened to hold enough observations.
  const double m3_sq = out.third_derivative * out.third_derivative;
  auto side_fit = [&](bool left) {
    const std::size_t n_side = left ? n_left : n_right;
    const double side_max = left ? -t.front() : t.back();
    double h2 = constants.curvature_factor *
                std::pow(out.variance_at_point / (out.density_at_point * m3_sq), 1.0 / 7.0) *
                std::pow(static_cast<double>(n_side), -1.0 / 7.0);
    if (!std::isfinite(h2) || h2 > side_max) h2 = side_max;
    const std::size_t need = constants.curvature_min_window;
    const double reach = left ? -t[split - need] : t[split + need - 1];
    h2 = std::max(h2, reach);

    std::size_t lo, hi;
    if (left) {
      lo = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), -h2) - t.begin());
      hi = split;
    } else {
      lo = split;
      hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), h2) - t.begin());
    }
    // Reflect the left side onto positive distances; curvature is invariant.
    std::vector<double> dist(t.begin() + lo, t.begin() + hi);
    if (left)
      for (double& d : dist) d = -d;
    const std::vector<double> resp(y.begin() + lo, y.begin() + hi);
    const Eigen::VectorXd quad = poly_ols(dist, resp, 0, dist.size(), 2, false, h2);

    SideWindow s;
    s.h = h2;
    s.count = dist.size();
    s.curvature = 2.0 * quad(2) / (h2 * h2);
    s.regularizer = constants.regularizer_factor * out.variance_at_point /
                    (static_cast<double>(s.count) * h2 * h2 * h2 * h2);
    return s;
  };
  const SideWindow left = side_fit(true);
  const SideWindow right = side_fit(false);
  out.curvature_h_left = left.h;
  out.curvature_h_right = right.h;
  out.curvature_left = left.curvature;
  out.curvature_right = right.curvature;
  out.regularizer_left = left.regularizer;
  out.regularizer_right = right.regularizer;

  // Stage 3: plug into the mean-squared-error optimum.  A cutoff problem
  // estimates one-sided limits whose variances add and whose curvatures
  // enter through their difference; an interior problem estimates a single
  // curve, so the one-sided curvatures are pooled by window size.
  double numerator, squared_curvature;
  if (cutoff) {
    const double gap = right.curvature - left.curvature;
    numerator = 2.0 * out.variance_at_point;
    squared_curvature = gap * gap;
  } else {
    const double pooled = (static_cast<double>(left.count) * left.curvature +
                           static_cast<double>(right.count) * right.curvature) /
                          static_cast<double>(left.count + right.count);
    numerator = out.variance_at_point;
    squared_curvature = pooled * pooled;
  }
  const double denom = out.density_at_point * (squared_curvature + left.regularizer + right.regularizer);
  const double constant = plug_in_constant(kernel, cutoff ? EvalSide::boundary_right : EvalSide::interior);
  out.value = constant * std::pow(numerator / denom, 0.2) * std::pow(nn, -0.2);
  out.value = std::min(out.value, t.back() - t.front());
  if (!(out.value > 0.0) || !std::isfinite(out.value))
    throw BandwidthError("Plug-in bandwidth came out non-positive or non-finite.");
  return out;
}

}  // namespace permrate

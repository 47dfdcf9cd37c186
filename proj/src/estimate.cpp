#include "permrate/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace permrate {

namespace {

// Fixed-capacity matrices keep the small solves off the heap.
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;

struct Window {
  std::size_t lo = 0, hi = 0;
};

Window find_window(std::span<const double> xs, double x0, double radius, EvalSide side) {
  const double lo_edge = (side == EvalSide::boundary_right) ? x0 : x0 - radius;
  const double hi_edge = x0 + radius;
  Window w;
  w.lo = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), lo_edge) - xs.begin());
  w.hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), hi_edge) - xs.begin());
  return w;
}

double poly_eval(const SmallVec& beta, double u) {
  double acc = 0.0;
  for (int j = static_cast<int>(beta.size()) - 1; j >= 0; --j) acc = acc * u + beta(j);
  return acc;
}

struct FitData {
  SmallVec beta;
  Window win;
  std::size_t n_eff = 0;
  double weight_sum = 0.0;
};

FitData fit_poly(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
                 int order, EvalSide side, std::size_t min_window) {
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  if (order < 0 || order > 6) throw ConfigError("Local polynomial order must lie in [0, 6].");
  const double radius = h * kernel_support(kernel);
  const Window win = find_window(xs, x0, radius, side);
  const int p = order + 1;

  SmallMat m = SmallMat::Zero(p, p);
  SmallVec b = SmallVec::Zero(p);
  std::size_t n_eff = 0;
  double wsum = 0.0;
  for (std::size_t i = win.lo; i < win.hi; ++i) {
    const double u = (xs[i] - x0) / h;
    const double w = kernel_value(kernel, u);
    if (w <= 0.0) continue;
    ++n_eff;
    wsum += w;
    double upow = w;
    double moments[13];
    for (int j = 0; j < 2 * p - 1; ++j) {
      moments[j] = upow;
      upow *= u;
    }
    for (int j = 0; j < p; ++j) {
      b(j) += moments[j] * ys[i];
      for (int l = j; l < p; ++l) m(j, l) += moments[j + l];
    }
  }
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < j; ++l) m(j, l) = m(l, j);

  const std::size_t need = std::max<std::size_t>(static_cast<std::size_t>(order) + 2, min_window);
  if (n_eff < need)
    throw EmptyWindowError("Kernel window holds " + std::to_string(n_eff) + " observations; need at least " +
                           std::to_string(need) + ".");

  Eigen::FullPivLU<SmallMat> lu(m);
  if (!lu.isInvertible()) throw SingularFitError("Local polynomial design is rank deficient in the window.");
  FitData fit;
  fit.beta = lu.solve(b);
  fit.win = win;
  fit.n_eff = n_eff;
  fit.weight_sum = wsum;
  if (!fit.beta.allFinite()) throw SingularFitError("Local polynomial fit produced non-finite coefficients.");
  return fit;
}

// Kernel density of the regressor at x0 from the fit window, normalized by
// the one-sided kernel mass when the point is a boundary.
double window_density(std::span<const double> xs, double h, KernelId kernel, EvalSide side, double weight_sum) {
  const MomentSide ms = (side == EvalSide::boundary_right) ? MomentSide::positive : MomentSide::full;
  const double mass = kernel_moment(kernel, 0, 1, ms);
  return weight_sum / (static_cast<double>(xs.size()) * h * mass);
}

// Gaussian kernel density and its derivative over the whole sample.
std::pair<double, double> gauss_density_and_slope(std::span<const double> xs, double x0, double g) {
  const double inv = 1.0 / std::sqrt(2.0 * M_PI);
  double f = 0.0, df = 0.0;
  for (double x : xs) {
    const double z = (x - x0) / g;
    if (std::abs(z) > 8.0) continue;
    const double k = inv * std::exp(-0.5 * z * z);
    f += k;
    df += z * k;  // d/dx0 phi((x - x0)/g) = ((x - x0)/g^2) phi
  }
  const double n = static_cast<double>(xs.size());
  return {f / (n * g), df / (n * g * g)};
}

// Nearest-neighbor matched residual variances (Abadie-Imbens style):
// sigma2_i = J/(J+1) * (y_i - mean of J nearest neighbors' y)^2, neighbors
// by |x| distance within the sample, distance ties broken by original id.
double nn_matched_sigma2(std::span<const double> xs, std::span<const double> ys, std::span<const std::uint32_t> ids,
                         std::size_t i, int J) {
  struct Cand {
    double dist;
    std::uint32_t id;
    double y;
  };
  thread_local std::vector<Cand> cands;
  cands.clear();

  const std::size_t n = xs.size();
  std::size_t l = i, r = i + 1;
  auto push_left = [&] {
    --l;
    cands.push_back({xs[i] - xs[l], ids[l], ys[l]});
  };
  auto push_right = [&] {
    cands.push_back({xs[r] - xs[i], ids[r], ys[r]});
    ++r;
  };
  while (static_cast<int>(cands.size()) < J && (l > 0 || r < n)) {
    if (l == 0)
      push_right();
    else if (r == n)
      push_left();
    else if (xs[i] - xs[l - 1] <= xs[r] - xs[i])
      push_left();
    else
      push_right();
  }
  // Pull in every remaining candidate tied with the current J-th distance so
  // the id tie-break sees the full tie block.
  double dmax = 0.0;
  for (const Cand& c : cands) dmax = std::max(dmax, c.dist);
  while (l > 0 && xs[i] - xs[l - 1] <= dmax) push_left();
  while (r < n && xs[r] - xs[i] <= dmax) push_right();

  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.id < b.id;
  });
  const int j_eff = std::min(J, static_cast<int>(cands.size()));
  if (j_eff <= 0)
    throw DegenerateVarianceError("Matched-neighbor variance needs at least two observations in the sample.");
  double acc = 0.0;
  for (int j = 0; j < j_eff; ++j) acc += cands[static_cast<std::size_t>(j)].y;
  const double jd = static_cast<double>(j_eff);
  const double gap = ys[i] - acc / jd;
  return jd / (jd + 1.0) * gap * gap;
}

// White-style variance of the local fit intercept with externally supplied
// squared residuals; returns n * h * Var(beta_0).
double sandwich_xi2(std::span<const double> xs, std::span<const double> ys, std::span<const std::uint32_t> ids,
                    const FitData& fit, double x0, double h, KernelId kernel, VarianceMode mode, int J) {
  const int p = static_cast<int>(fit.beta.size());
  SmallMat m = SmallMat::Zero(p, p);
  SmallMat s = SmallMat::Zero(p, p);
  SmallVec xrow(p);
  for (std::size_t i = fit.win.lo; i < fit.win.hi; ++i) {
    const double u = (xs[i] - x0) / h;
    const double w = kernel_value(kernel, u);
    if (w <= 0.0) continue;
    double up = 1.0;
    for (int j = 0; j < p; ++j) {
      xrow(j) = up;
      up *= u;
    }
    double s2;
    if (mode == VarianceMode::nn_matched) {
      s2 = nn_matched_sigma2(xs, ys, ids, i, J);
    } else {
      const double resid = ys[i] - poly_eval(fit.beta, u);
      s2 = resid * resid;
    }
    m += w * xrow * xrow.transpose();
    s += (w * w * s2) * xrow * xrow.transpose();
  }
  Eigen::FullPivLU<SmallMat> lu(m);
  if (!lu.isInvertible()) throw SingularFitError("Local polynomial design is rank deficient in the window.");
  const SmallMat minv = lu.inverse();
  const double v = (minv * s * minv)(0, 0);
  if (!(v >= 0.0) || !std::isfinite(v))
    throw VarianceUnstableError("Sandwich variance came out non-finite or negative.");
  return static_cast<double>(xs.size()) * h * v;
}

// Plug-in variance for the mean family: equivalent-kernel constant times
// local residual variance over the regressor density.
double plugin_mean_xi2(std::span<const double> xs, std::span<const double> ys, const FitData& fit, double x0, double h,
                       KernelId kernel, EvalSide side, double floor) {
  double rss = 0.0;
  for (std::size_t i = fit.win.lo; i < fit.win.hi; ++i) {
    const double u = (xs[i] - x0) / h;
    const double w = kernel_value(kernel, u);
    if (w <= 0.0) continue;
    const double resid = ys[i] - poly_eval(fit.beta, u);
    rss += w * resid * resid;
  }
  const double v = rss / fit.weight_sum;
  const double f = window_density(xs, h, kernel, side, fit.weight_sum);
  if (f < floor) throw VarianceUnstableError("Regressor density estimate fell below the configured floor.");
  const MomentSide ms = (side == EvalSide::boundary_right) ? MomentSide::positive : MomentSide::full;
  const double c = poly_matrices(kernel, static_cast<int>(fit.beta.size()) - 1, ms).variance_factor;
  const double xi2 = c * v / f;
  if (!std::isfinite(xi2) || xi2 < 0.0) throw VarianceUnstableError("Plug-in variance came out non-finite.");
  return xi2;
}

// How much to raise the polynomial order when bias handling is order-bump:
// two steps at interior points when the order is even (the next odd order
// gains nothing there), one step otherwise.
int order_bump_step(EvalSide side, int order) {
  return (side == EvalSide::interior && order % 2 == 0) ? 2 : 1;
}

// ---- mean family ----

EstimateResult estimate_mean(const SortedView& s, const EvalPoint& at, double h, const EstimatorSpec& spec) {
  EstimateResult out;
  out.h = h;
  // Rate exponent for the leading bias term: h^2 at interior points (odd
  // orders and the local-constant fit), h^(order+1) otherwise.
  out.bias_power = (at.side == EvalSide::interior && spec.order == 0) ? 2 : spec.order + 1;

  const FitData base =
      fit_poly(s.x, s.y, at.x, h, spec.kernel, spec.order + (spec.bias == BiasMode::order_bump ? order_bump_step(at.side, spec.order) : 0),
               at.side, spec.min_window);
  out.theta_raw = base.beta(0);
  out.n_eff = base.n_eff;
  const FitData* work = &base;

  switch (spec.bias) {
    case BiasMode::none:
    case BiasMode::order_bump:
      out.bias_hat = 0.0;
      out.theta = out.theta_raw;
      break;
    case BiasMode::plugin: {
      const double hp = spec.pilot_factor * h;
      if (at.side == EvalSide::interior && spec.order == 0) {
        // Local constant fit: the leading bias has a design term driven by
        // the regressor density slope in addition to the curvature term.
        const FitData pilot = fit_poly(s.x, s.y, at.x, hp, spec.kernel, 2, at.side, spec.min_window);
        const double dm = pilot.beta(1) / hp;
        const double d2m = 2.0 * pilot.beta(2) / (hp * hp);
        auto [f, df] = gauss_density_and_slope(s.x, at.x, hp);
        if (f < spec.density_floor)
          throw BiasUnstableError("Pilot density estimate fell below the configured floor.");
        const double kappa2 = kernel_moment(spec.kernel, 2, 1, MomentSide::full);
        out.bias_hat = kappa2 * (dm * df / f + 0.5 * d2m);
      } else if (at.side == EvalSide::interior && spec.order % 2 == 0) {
        throw ConfigError("Plug-in bias is not provided for interior even-order fits above 0; use order-bump.");
      } else {
        const FitData pilot = fit_poly(s.x, s.y, at.x, hp, spec.kernel, spec.order + 1, at.side, spec.min_window);
        const double lead = pilot.beta(spec.order + 1) / std::pow(hp, spec.order + 1);
        double factor;
        if (at.side == EvalSide::boundary_right && spec.order == 0 && spec.edge_bias_kernel_power == 2) {
          // Alternative slope-moment convention: weight the first moment by
          // the squared kernel instead of the kernel itself.
          factor = kernel_moment(spec.kernel, 1, 2, MomentSide::positive) /
                   kernel_moment(spec.kernel, 0, 1, MomentSide::positive);
        } else {
          const MomentSide ms = (at.side == EvalSide::boundary_right) ? MomentSide::positive : MomentSide::full;
          factor = poly_matrices(spec.kernel, spec.order, ms).bias_factor;
        }
        out.bias_hat = lead * factor;
      }
      if (!std::isfinite(out.bias_hat)) throw BiasUnstableError("Plug-in bias correction came out non-finite.");
      out.theta = out.theta_raw - std::pow(h, out.bias_power) * out.bias_hat;
      break;
    }
  }

  switch (spec.variance) {
    case VarianceMode::plugin:
      out.xi2 = plugin_mean_xi2(s.x, s.y, *work, at.x, h, spec.kernel, at.side, spec.density_floor);
      break;
    case VarianceMode::nn_matched:
      if (s.x.size() <= static_cast<std::size_t>(spec.nn_neighbors))
        throw VarianceUnstableError("Sample too small for nearest-neighbor matched residuals.");
      out.xi2 = sandwich_xi2(s.x, s.y, s.ids, *work, at.x, h, spec.kernel, VarianceMode::nn_matched,
                             spec.nn_neighbors);
      break;
    case VarianceMode::sandwich:
      out.xi2 = sandwich_xi2(s.x, s.y, s.ids, *work, at.x, h, spec.kernel, VarianceMode::sandwich, spec.nn_neighbors);
      break;
  }
  return out;
}

// ---- quantile family ----

EstimateResult estimate_quantile(const SortedView& s, const EvalPoint& at, double h, const EstimatorSpec& spec) {
  if (spec.quantile <= 0.0 || spec.quantile >= 1.0) throw ConfigError("Quantile level must lie in (0, 1).");
  if (spec.bias == BiasMode::order_bump)
    throw ConfigError("Order-bump bias is not defined for the quantile family; use plugin or none.");

  EstimateResult out;
  out.h = h;
  out.bias_power = 2;
  out.theta_raw = local_quantile(s.x, s.y, at.x, h, spec.kernel, spec.quantile, spec.min_window);

  const double radius = h * kernel_support(spec.kernel);
  const Window win = find_window(s.x, at.x, radius, at.side);

  // Window weight total, count, and response spread for the pilot pieces.
  double wsum = 0.0, ysum = 0.0, y2sum = 0.0;
  std::size_t n_eff = 0;
  for (std::size_t i = win.lo; i < win.hi; ++i) {
    const double w = kernel_value(spec.kernel, (s.x[i] - at.x) / h);
    if (w <= 0.0) continue;
    ++n_eff;
    wsum += w;
    ysum += s.y[i];
    y2sum += s.y[i] * s.y[i];
  }
  out.n_eff = n_eff;

  // Conditional density of the response at the estimated quantile.
  const double ybar = ysum / static_cast<double>(n_eff);
  const double yvar = std::max(0.0, y2sum / static_cast<double>(n_eff) - ybar * ybar);
  const double ysd = std::sqrt(yvar);
  if (!(ysd > 0.0)) throw VarianceUnstableError("Window responses are constant; quantile density is degenerate.");
  const double b = 1.06 * ysd * std::pow(static_cast<double>(n_eff), -0.2);
  const double invs2pi = 1.0 / std::sqrt(2.0 * M_PI);
  double fy = 0.0;
  for (std::size_t i = win.lo; i < win.hi; ++i) {
    const double w = kernel_value(spec.kernel, (s.x[i] - at.x) / h);
    if (w <= 0.0) continue;
    const double z = (s.y[i] - out.theta_raw) / b;
    fy += w * invs2pi * std::exp(-0.5 * z * z);
  }
  fy /= b * wsum;
  const double fx = window_density(s.x, h, spec.kernel, at.side, wsum);
  if (fy < spec.density_floor || fx < spec.density_floor)
    throw VarianceUnstableError("Density estimate fell below the configured floor in the quantile variance.");

  if (spec.bias == BiasMode::plugin) {
    if (at.side != EvalSide::interior)
      throw ConfigError("Plug-in bias for the quantile family is defined at interior points only.");
    const double hp = spec.pilot_factor * h;
    thread_local std::vector<double> indicators;
    indicators.assign(s.y.size(), 0.0);
    for (std::size_t i = 0; i < s.y.size(); ++i) indicators[i] = (s.y[i] <= out.theta_raw) ? 1.0 : 0.0;
    const FitData pilot =
        fit_poly(s.x, std::span<const double>(indicators), at.x, hp, spec.kernel, 2, at.side, spec.min_window);
    const double dF = pilot.beta(1) / hp;
    const double d2F = 2.0 * pilot.beta(2) / (hp * hp);
    auto [fr, dfr] = gauss_density_and_slope(s.x, at.x, hp);
    if (fr < spec.density_floor) throw BiasUnstableError("Pilot density estimate fell below the configured floor.");
    const double kappa2 = kernel_moment(spec.kernel, 2, 1, MomentSide::full);
    out.bias_hat = -kappa2 * (dF * dfr + 0.5 * d2F * fr) / (fy * fr);
    if (!std::isfinite(out.bias_hat)) throw BiasUnstableError("Plug-in quantile bias came out non-finite.");
  } else {
    out.bias_hat = 0.0;
  }
  out.theta = out.theta_raw - h * h * out.bias_hat;

  const MomentSide ms = (at.side == EvalSide::boundary_right) ? MomentSide::positive : MomentSide::full;
  const double c = poly_matrices(spec.kernel, 0, ms).variance_factor;
  out.xi2 = c * spec.quantile * (1.0 - spec.quantile) / (fy * fy * fx);
  if (!std::isfinite(out.xi2)) throw VarianceUnstableError("Quantile variance came out non-finite.");
  return out;
}

// ---- density edge family ----

EstimateResult estimate_density_edge(const SortedView& s, double h, const EstimatorSpec& spec) {
  if (spec.bias == BiasMode::order_bump)
    throw ConfigError("Order-bump bias is not defined for the density family; use plugin or none.");
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");

  EstimateResult out;
  out.h = h;
  out.bias_power = 1;
  const std::size_t n = s.x.size();
  out.theta_raw = density_edge_stat(s.x, h, spec.kernel, n);

  const double fpos = edge_density(s.x, h, spec.kernel, n, true);
  const double fneg = edge_density(s.x, h, spec.kernel, n, false);
  const double radius = h * kernel_support(spec.kernel);
  std::size_t n_eff = 0;
  for (double x : s.x) {
    if (std::abs(x) > radius) break;  // sorted by |x|
    if (kernel_value(spec.kernel, x / h) > 0.0) ++n_eff;
  }
  out.n_eff = n_eff;

  if (spec.bias == BiasMode::plugin) {
    // One-sided density slopes from interior kernel estimates at g/2 and
    // 3g/2 on each side of zero (bandwidth g/2 keeps the windows one-sided).
    const double g = spec.pilot_factor * h;
    auto one_sided = [&](bool positive, double t, double b) {
      const double reach = t + b * kernel_support(spec.kernel);
      double acc = 0.0;
      for (double x : s.x) {
        const double a = std::abs(x);
        if (a > reach) break;  // sorted by |x|
        if ((x >= 0.0) != positive) continue;
        acc += kernel_value(spec.kernel, (a - t) / b);
      }
      return acc / (static_cast<double>(n) * b);
    };
    const double sp = (one_sided(true, 1.5 * g, 0.5 * g) - one_sided(true, 0.5 * g, 0.5 * g)) / g;
    const double sn = (one_sided(false, 1.5 * g, 0.5 * g) - one_sided(false, 0.5 * g, 0.5 * g)) / g;
    // In original coordinates the left-side slope flips sign.
    const double kappa1 = kernel_moment(spec.kernel, 1, 1, MomentSide::positive);
    out.bias_hat = kappa1 * (sp + (-sn));
    if (!std::isfinite(out.bias_hat)) throw BiasUnstableError("Plug-in density bias came out non-finite.");
  } else {
    out.bias_hat = 0.0;
  }
  out.theta = out.theta_raw - h * out.bias_hat;

  const double kpos2 = kernel_moment(spec.kernel, 0, 2, MomentSide::positive);
  out.xi2 = kpos2 * (fpos + fneg);
  if (!std::isfinite(out.xi2) || out.xi2 < 0.0)
    throw VarianceUnstableError("Density-edge variance came out non-finite.");
  return out;
}

}  // namespace

// ---- public API ----

Family family_from_string(const std::string& s) {
  if (s == "local-mean") return Family::local_mean;
  if (s == "local-quantile") return Family::local_quantile;
  if (s == "density-edge") return Family::density_edge;
  throw ConfigError("Unknown family '" + s + "'.");
}

BiasMode bias_from_string(const std::string& s) {
  if (s == "plugin") return BiasMode::plugin;
  if (s == "order-bump") return BiasMode::order_bump;
  if (s == "none") return BiasMode::none;
  throw ConfigError("Unknown bias mode '" + s + "'; expected plugin, order-bump, or none.");
}

VarianceMode variance_from_string(const std::string& s) {
  if (s == "plugin") return VarianceMode::plugin;
  if (s == "nn3" || s == "nn-matched") return VarianceMode::nn_matched;
  if (s == "sandwich") return VarianceMode::sandwich;
  throw ConfigError("Unknown variance mode '" + s + "'; expected plugin, nn3, or sandwich.");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::local_mean:
      return "local-mean";
    case Family::local_quantile:
      return "local-quantile";
    case Family::density_edge:
      return "density-edge";
  }
  return "unknown";
}

std::string to_string(BiasMode b) {
  switch (b) {
    case BiasMode::plugin:
      return "plugin";
    case BiasMode::order_bump:
      return "order-bump";
    case BiasMode::none:
      return "none";
  }
  return "unknown";
}

std::string to_string(VarianceMode v) {
  switch (v) {
    case VarianceMode::plugin:
      return "plugin";
    case VarianceMode::nn_matched:
      return "nn3";
    case VarianceMode::sandwich:
      return "sandwich";
  }
  return "unknown";
}

LprFit lpr_fit(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
               int order, EvalSide side, std::size_t min_window) {
  const FitData fit = fit_poly(xs, ys, x0, h, kernel, order, side, min_window);
  LprFit out;
  out.beta.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  out.lo = fit.win.lo;
  out.hi = fit.win.hi;
  out.n_eff = fit.n_eff;
  out.weight_sum = fit.weight_sum;
  return out;
}

double nw_mean(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
               EvalSide side, std::size_t min_window) {
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  const Window win = find_window(xs, x0, h * kernel_support(kernel), side);
  double num = 0.0, den = 0.0;
  std::size_t n_eff = 0;
  for (std::size_t i = win.lo; i < win.hi; ++i) {
    const double w = kernel_value(kernel, (xs[i] - x0) / h);
    if (w <= 0.0) continue;
    ++n_eff;
    num += w * ys[i];
    den += w;
  }
  // Unlike polynomial fits, a single weighted point already defines the
  // average, so only the caller-supplied minimum applies.
  if (n_eff < std::max<std::size_t>(1, min_window))
    throw EmptyWindowError("Kernel window holds " + std::to_string(n_eff) + " observations; need at least " +
                           std::to_string(std::max<std::size_t>(1, min_window)) + ".");
  return num / den;
}

double local_quantile(std::span<const double> xs, std::span<const double> ys, double x0, double h, KernelId kernel,
                      double chi, std::size_t min_window) {
  if (chi <= 0.0 || chi >= 1.0) throw ConfigError("Quantile level must lie in (0, 1).");
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  const double radius = h * kernel_support(kernel);
  const Window win = find_window(xs, x0, radius, EvalSide::interior);

  struct WY {
    double y, w;
  };
  thread_local std::vector<WY> pairs;
  pairs.clear();
  double total = 0.0;
  for (std::size_t i = win.lo; i < win.hi; ++i) {
    const double w = kernel_value(kernel, (xs[i] - x0) / h);
    if (w <= 0.0) continue;
    pairs.push_back({ys[i], w});
    total += w;
  }
  if (pairs.size() < std::max<std::size_t>(1, min_window))
    throw EmptyWindowError("Kernel window holds " + std::to_string(pairs.size()) +
                           " observations; need at least " + std::to_string(std::max<std::size_t>(1, min_window)) +
                           ".");
  std::sort(pairs.begin(), pairs.end(), [](const WY& a, const WY& b) { return a.y < b.y; });
  const double target = chi * total;
  double cum = 0.0;
  for (const WY& p : pairs) {
    cum += p.w;
    if (cum >= target) return p.y;
  }
  return pairs.back().y;  // numerically unreachable; guards fp slack
}

double density_edge_stat(std::span<const double> xs_by_abs, double h, KernelId kernel, std::size_t n_total) {
  if (h <= 0.0 || !std::isfinite(h)) throw ConfigError("Bandwidth must be positive and finite.");
  const double radius = h * kernel_support(kernel);
  // Separate accumulators per sign: on sign-symmetric data the two partial
  // sums see identical values in identical order (arrays are sorted by |x|),
  // so the difference is exactly zero.
  double pos = 0.0, neg = 0.0;
  for (double x : xs_by_abs) {
    const double a = std::abs(x);
    if (a > radius) break;
    const double w = kernel_value(kernel, a / h);
    if (x >= 0.0)
      pos += w;
    else
      neg += w;
  }
  return (pos - neg) / (static_cast<double>(n_total) * h);
}

double edge_density(std::span<const double> xs_by_abs, double h, KernelId kernel, std::size_t n_total, bool positive) {
  const double radius = h * kernel_support(kernel);
  double acc = 0.0;
  for (double x : xs_by_abs) {
    const double a = std::abs(x);
    if (a > radius) break;
    if ((x >= 0.0) != positive) continue;
    acc += kernel_value(kernel, a / h);
  }
  const double mass = kernel_moment(kernel, 0, 1, MomentSide::positive);
  return acc / (static_cast<double>(n_total) * h * mass);
}

EstimateResult estimate(const SortedView& sample, const EvalPoint& at, double h, const EstimatorSpec& spec) {
  if (sample.x.size() != sample.y.size() && spec.family != Family::density_edge)
    throw ConfigError("Regressor and response columns have different lengths.");
  switch (spec.family) {
    case Family::local_mean:
      return estimate_mean(sample, at, h, spec);
    case Family::local_quantile:
      return estimate_quantile(sample, at, h, spec);
    case Family::density_edge:
      return estimate_density_edge(sample, h, spec);
  }
  throw ConfigError("Unknown estimator family.");
}

EstimateResult estimate(std::vector<double> x, std::vector<double> y, const EvalPoint& at, double h,
                        const EstimatorSpec& spec) {
  const std::size_t n = x.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  if (spec.family == Family::density_edge) {
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double da = std::abs(x[a]), db = std::abs(x[b]);
      if (da != db) return da < db;
      return a < b;
    });
  } else {
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (x[a] != x[b]) return x[a] < x[b];
      return a < b;
    });
  }
  std::vector<double> xs(n), ys;
  std::vector<std::uint32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ids[i] = order[i];
  }
  if (!y.empty()) {
    ys.resize(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  }
  SortedView view{std::span<const double>(xs), std::span<const double>(ys), std::span<const std::uint32_t>(ids), {}};
  return estimate(view, at, h, spec);
}

}  // namespace permrate

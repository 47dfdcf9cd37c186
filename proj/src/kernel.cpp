#include "permrate/kernel.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace permrate {

namespace {

constexpr double kGaussCut = 8.0;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);

// integral over [0, inf) of u^s K(u) du
double positive_moment_t1(KernelId k, double s) {
  switch (k) {
    case KernelId::uniform:
      return 0.5 / (s + 1.0);
    case KernelId::triangular:
      return 1.0 / ((s + 1.0) * (s + 2.0));
    case KernelId::epanechnikov:
      return 1.5 / ((s + 1.0) * (s + 3.0));
    case KernelId::gaussian:
      return kInvSqrt2Pi * std::pow(2.0, 0.5 * (s - 1.0)) * std::tgamma(0.5 * (s + 1.0));
  }
  throw ConfigError("Unknown kernel id.");
}

// integral over [0, inf) of u^s K(u)^2 du
double positive_moment_t2(KernelId k, double s) {
  switch (k) {
    case KernelId::uniform:
      return 0.25 / (s + 1.0);
    case KernelId::triangular:
      return 2.0 / ((s + 1.0) * (s + 2.0) * (s + 3.0));
    case KernelId::epanechnikov:
      return 4.5 / ((s + 1.0) * (s + 3.0) * (s + 5.0));
    case KernelId::gaussian:
      return std::tgamma(0.5 * (s + 1.0)) / (4.0 * M_PI);
  }
  throw ConfigError("Unknown kernel id.");
}

}  // namespace

KernelId kernel_from_string(const std::string& name) {
  if (name == "triangular") return KernelId::triangular;
  if (name == "epanechnikov") return KernelId::epanechnikov;
  if (name == "uniform") return KernelId::uniform;
  if (name == "gaussian") return KernelId::gaussian;
  throw ConfigError("Unknown kernel '" + name + "'; expected triangular, epanechnikov, uniform, or gaussian.");
}

std::string to_string(KernelId k) {
  switch (k) {
    case KernelId::triangular:
      return "triangular";
    case KernelId::epanechnikov:
      return "epanechnikov";
    case KernelId::uniform:
      return "uniform";
    case KernelId::gaussian:
      return "gaussian";
  }
  return "unknown";
}

double kernel_value(KernelId k, double u) {
  const double a = std::abs(u);
  switch (k) {
    case KernelId::triangular:
      return a < 1.0 ? 1.0 - a : 0.0;
    case KernelId::epanechnikov:
      return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelId::uniform:
      return a <= 1.0 ? 0.5 : 0.0;
    case KernelId::gaussian:
      return a <= kGaussCut ? kInvSqrt2Pi * std::exp(-0.5 * u * u) : 0.0;
  }
  return 0.0;
}

double kernel_support(KernelId k) { return k == KernelId::gaussian ? kGaussCut : 1.0; }

double kernel_moment(KernelId k, int s, int t, MomentSide side) {
  if (s < 0) throw ConfigError("Kernel moment exponent s must be >= 0.");
  if (t != 1 && t != 2) throw ConfigError("Kernel moment power t must be 1 or 2.");
  const double sd = static_cast<double>(s);
  const double half = (t == 1) ? positive_moment_t1(k, sd) : positive_moment_t2(k, sd);
  if (side == MomentSide::positive) return half;
  // Symmetric kernels: odd full-axis moments vanish, even ones double.
  return (s % 2 == 1) ? 0.0 : 2.0 * half;
}

const PolyMatrices& poly_matrices(KernelId k, int order, MomentSide side) {
  if (order < 0 || order > 6) throw ConfigError("Local polynomial order must lie in [0, 6].");

  static std::mutex mu;
  static std::map<std::tuple<KernelId, int, MomentSide>, std::unique_ptr<PolyMatrices>> cache;

  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(k, order, side);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  const int p = order + 1;
  auto m = std::make_unique<PolyMatrices>();
  m->kernel = k;
  m->order = order;
  m->side = side;
  m->gamma.resize(p, p);
  m->delta.resize(p, p);
  m->gamma_star.resize(p);
  for (int j = 0; j < p; ++j) {
    for (int l = 0; l < p; ++l) {
      m->gamma(j, l) = kernel_moment(k, j + l, 1, side);
      m->delta(j, l) = kernel_moment(k, j + l, 2, side);
    }
    m->gamma_star(j) = kernel_moment(k, order + 1 + j, 1, side);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(m->gamma);
  if (!lu.isInvertible()) throw ConfigError("Moment matrix is singular for the requested order.");
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(p);
  e1(0) = 1.0;
  Eigen::VectorXd ginv_e1 = lu.solve(e1);
  m->first_row_inv = ginv_e1.transpose();
  m->variance_factor = ginv_e1.dot(m->delta * ginv_e1);
  m->bias_factor = ginv_e1.dot(m->gamma_star);

  auto [pos, _] = cache.emplace(key, std::move(m));
  return *pos->second;
}

}  // namespace permrate

#pragma once

#include <string>

#include <Eigen/Dense>

#include "permrate/errors.hpp"

namespace permrate {

// Supported kernel shapes.  All are symmetric probability densities; the
// gaussian kernel is truncated to |u| <= 8 in weight loops (tail mass below
// 1e-15) so that every kernel has a finite window.
enum class KernelId { triangular, epanechnikov, uniform, gaussian };

KernelId kernel_from_string(const std::string& name);
std::string to_string(KernelId k);

// K(u); zero outside the working support.
double kernel_value(KernelId k, double u);

// Half-width of the working support: 1 for the compact kernels, 8 for gaussian.
double kernel_support(KernelId k);

// Which part of the axis a moment integrates over.
enum class MomentSide { full, positive };

// Moment of the kernel: integral of u^s K(u)^t over the full axis or over
// [0, inf).  Closed forms; t must be 1 or 2 and s >= 0.
double kernel_moment(KernelId k, int s, int t, MomentSide side);

// Matrices driving local polynomial fits of a given order.  Entries are
// kernel moments: gamma[j,l] = mu_{j+l,1}, delta[j,l] = mu_{j+l,2},
// gamma_star[j] = mu_{order+1+j,1}, where mu uses one-sided moments for
// boundary fits and full-axis moments for interior fits.
struct PolyMatrices {
  KernelId kernel;
  int order;
  MomentSide side;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd delta;
  Eigen::VectorXd gamma_star;
  Eigen::RowVectorXd first_row_inv;  // e1' gamma^{-1}
  double variance_factor;            // e1' gamma^{-1} delta gamma^{-1} e1
  double bias_factor;                // e1' gamma^{-1} gamma_star
};

// Shared immutable instance, built once per (kernel, order, side).
// order must lie in [0, 6].
const PolyMatrices& poly_matrices(KernelId k, int order, MomentSide side);

}  // namespace permrate

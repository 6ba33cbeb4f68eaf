#pragma once

// Squared maximum mean discrepancy with a Gaussian kernel, computed with the
// kernel trick over Gram matrices. Samples are stored one per column.

#include <Eigen/Dense>

namespace poar::srl {

using Mat = Eigen::MatrixXd;

inline constexpr double kMinBandwidth = 1e-6;

struct MmdResult {
  double value = 0.0;      // clamped at 0
  double raw = 0.0;        // before clamping
  double bandwidth = 0.0;  // sigma actually used
  Mat grad_x;              // d value / d x, same shape as x (when requested)
  Mat grad_y;
};

double gaussian_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double sigma);

/// Median of all pairwise Euclidean distances in the joined sample [x y],
/// floored at kMinBandwidth.
double median_bandwidth(const Mat& x, const Mat& y);

/// MMD^2 with a fixed bandwidth.
MmdResult mmd_fixed(const Mat& x, const Mat& y, double sigma, bool want_grads = false);

/// MMD^2 with the median-heuristic bandwidth recomputed from the inputs.
/// Gradients include the dependence of the bandwidth on the inputs.
MmdResult mmd_loss(const Mat& x, const Mat& y, bool want_grads = false);

}  // namespace poar::srl

#pragma once

// Oracle and contract checks shared by the unit tests and the acceptance
// runner. Each returns the measured worst-case discrepancy so callers can
// apply their own tolerance and print it.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "poar/config.hpp"
#include "poar/nn.hpp"

namespace poar::checks {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ---- MMD

/// Gaussian-kernel MMD^2 as an explicit double sum, with the median
/// bandwidth of the joined sample computed by full sort.
double mmd_brute_force(const Mat& x, const Mat& y);

struct MmdCheck {
  int pairs = 0;
  double max_error = 0.0;  // |kernel trick - brute force|
  double max_self = 0.0;   // max mmd_loss(X, X)
};
MmdCheck mmd_oracle(int pairs, std::uint64_t seed);

// ---- finite differences

/// Analytic gradient paired with the values it differentiates.
struct GradTarget {
  Mat* value;
  Mat analytic;
};

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over all entries
/// of all targets, using central differences with step h.
double finite_difference_error(const std::function<double()>& loss, std::vector<GradTarget>& targets,
                               double h = 1e-6);

struct GradCheck {
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
};

/// reconstruction, reward, inverse, forward, domain, ppo, srl_total_loss.
std::vector<GradCheck> gradient_suite(int instances, std::uint64_t seed);

// ---- GAE

/// A_t = sum_l (gamma lambda)^l (prod of continuation masks) delta_{t+l}.
Vec gae_brute_force(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& dones,
                    double bootstrap, double gamma, double lambda);

struct GaeCheck {
  int batches = 0;
  double max_error = 0.0;  // advantages and returns
};
GaeCheck gae_oracle(int batches, std::uint64_t seed);

// ---- PCA

/// Descending explained-variance ratios from a covariance eigendecomposition.
Vec covariance_explained_ratios(const Mat& states);

struct PcaCheck {
  int matrices = 0;
  double max_error = 0.0;
};
PcaCheck pca_oracle(int matrices, std::uint64_t seed);

// ---- training-loop contracts

/// Small poar configuration used by the contract checks (16x16 images).
RunConfig small_config(TrainMode mode);

struct AlphaCheck {
  double encoder_grad_rel = 0.0;    // max |g_a - a g_1| / |a g_1| over encoder entries
  double encoder_update_rel = 0.0;  // same on the applied parameter change
  double encoder_update_err = 0.0;  // max |du_a - a du_1|
  double update_rounding = 0.0;     // floating-point rounding bound for the update comparison
  double policy_max_diff = 0.0;     // policy/value parameters after the step
  double encoder_grad_norm = 0.0;
};
/// One RL minibatch step with plain gradient descent at alpha and at 1.
AlphaCheck alpha_contract(double alpha, std::uint64_t seed);

struct DegeneracyCheck {
  int updates = 0;
  double max_param_diff = 0.0;
  bool curves_equal = false;
};
/// poar with zero SRL weights and alpha = 1 against ppo_baseline.
DegeneracyCheck mode_degeneracy(int updates, std::uint64_t seed);

double max_abs_diff(const nn::ParamList& a, const nn::ParamList& b);

}  // namespace poar::checks

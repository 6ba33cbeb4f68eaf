#pragma once

// Proximal policy optimization pieces: categorical policy and value heads
// reading the latent state, generalized advantage estimation, and the
// clipped-surrogate loss with analytic gradients.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "poar/nn.hpp"

namespace poar::ppo {

using nn::Mat;
using nn::ParamList;
using nn::Rng;
using nn::Vec;
using RowVec = Eigen::RowVectorXd;

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 4;
  int minibatches = 4;
  int steps_per_update = 2048;  // across all environment workers
  int n_envs = 8;
  double max_grad_norm = 0.5;   // <= 0 disables clipping
  std::vector<int> hidden{64, 64};

  void validate() const;
  int steps_per_env() const { return steps_per_update / n_envs; }
  int minibatch_size() const { return steps_per_update / minibatches; }
  bool operator==(const PPOConfig&) const = default;
};

struct PolicyOutput {
  Mat logits;     // 4 x B
  RowVec values;  // 1 x B
};

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

Vec log_softmax(const Vec& logits);

/// Samples from softmax(logits) using one uniform draw from `rng`.
ActResult sample_action(const Vec& logits, double value, Rng& rng);

/// Separate policy and value MLPs over the whole latent state.
class PolicyValueNet {
 public:
  PolicyValueNet(int state_dim, const std::vector<int>& hidden, Rng& rng);

  PolicyOutput forward(const Mat& states);
  /// Backpropagates loss gradients on logits and values; returns the gradient
  /// with respect to the states.
  Mat backward(const Mat& grad_logits, const RowVec& grad_values);

  /// One action per state column.
  std::vector<ActResult> act(const Mat& states, Rng& rng);

  ParamList policy_params() const { return policy_.params(); }
  ParamList value_params() const { return value_.params(); }
  ParamList params() const;
  nn::Sequential& policy_net() { return policy_; }
  nn::Sequential& value_net() { return value_; }

 private:
  nn::Sequential policy_;
  nn::Sequential value_;
};

struct GaeResult {
  Vec advantages;
  Vec returns;
};

/// GAE over one environment's contiguous sequence. `dones[t]` marks that the
/// episode ended after step t; `bootstrap_value` is the value of the state
/// following the last step.
GaeResult compute_gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& dones,
                      double bootstrap_value, double gamma, double lambda);

/// In-place (a - mean) / (std + 1e-8) with the population std.
void normalize_advantages(Vec& advantages);

struct PpoMinibatch {
  std::vector<int> actions;
  Vec old_log_probs;
  Vec advantages;
  Vec returns;
};

struct PpoLoss {
  double total = 0.0;
  double surrogate = 0.0;  // -mean(min(rho A, clip(rho) A))
  double value = 0.0;      // mean((v - R)^2)
  double entropy = 0.0;    // mean entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  Mat grad_logits;
  RowVec grad_values;
};

PpoLoss ppo_loss(const PpoMinibatch& batch, const Mat& logits, const RowVec& values,
                 const PPOConfig& cfg);

}  // namespace poar::ppo

#include "poar/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "poar/env.hpp"
#include "poar/error.hpp"
#include "poar/rng.hpp"

namespace poar::ppo {

void PPOConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma: must be in [0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda: must be in [0,1]");
  if (!(clip_epsilon > 0.0)) throw ConfigError("ppo.clip_epsilon: must be > 0");
  if (!(value_coef >= 0.0)) throw ConfigError("ppo.value_coef: must be >= 0");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef: must be >= 0");
  if (epochs < 1) throw ConfigError("ppo.epochs: must be >= 1");
  if (minibatches < 1) throw ConfigError("ppo.minibatches: must be >= 1");
  if (n_envs < 1) throw ConfigError("ppo.n_envs: must be >= 1");
  if (steps_per_update < 1 || steps_per_update % minibatches != 0) {
    throw ConfigError("ppo.steps_per_update: must be divisible by ppo.minibatches");
  }
  if (steps_per_update % n_envs != 0) {
    throw ConfigError("ppo.steps_per_update: must be divisible by ppo.n_envs");
  }
  if (!std::isfinite(max_grad_norm)) throw ConfigError("ppo.max_grad_norm: must be finite");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("ppo.hidden: layer widths must be positive");
  }
}

Vec log_softmax(const Vec& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

ActResult sample_action(const Vec& logits, double value, Rng& rng) {
  const Vec logp = log_softmax(logits);
  const double u = uniform01(rng);
  double cum = 0.0;
  int action = static_cast<int>(logits.size()) - 1;
  for (int a = 0; a < logits.size(); ++a) {
    cum += std::exp(logp[a]);
    if (u < cum) {
      action = a;
      break;
    }
  }
  return {action, logp[action], value};
}

PolicyValueNet::PolicyValueNet(int state_dim, const std::vector<int>& hidden, Rng& rng)
    : policy_(nn::make_mlp(state_dim, hidden, env::kNumActions, nn::Activation::tanh, rng, 0.01,
                           "policy")),
      value_(nn::make_mlp(state_dim, hidden, 1, nn::Activation::tanh, rng, 1.0, "value")) {}

PolicyOutput PolicyValueNet::forward(const Mat& states) {
  PolicyOutput out;
  out.logits = policy_.forward(states);
  out.values = value_.forward(states).row(0);
  return out;
}

Mat PolicyValueNet::backward(const Mat& grad_logits, const RowVec& grad_values) {
  Mat g = policy_.backward(grad_logits, true);
  g += value_.backward(grad_values, true);
  return g;
}

std::vector<ActResult> PolicyValueNet::act(const Mat& states, Rng& rng) {
  const PolicyOutput out = forward(states);
  std::vector<ActResult> acts;
  acts.reserve(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    acts.push_back(sample_action(out.logits.col(j), out.values[j], rng));
  }
  return acts;
}

ParamList PolicyValueNet::params() const {
  ParamList out = policy_.params();
  for (auto* p : value_.params()) out.push_back(p);
  return out;
}

GaeResult compute_gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& dones,
                      double bootstrap_value, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw UsageError("compute_gae: rewards, values and dones differ in length");
  }
  GaeResult out;
  out.advantages.resize(n);
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * live * next_value - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

void normalize_advantages(Vec& a) {
  if (a.size() == 0) return;
  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();
  a = ((a.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

PpoLoss ppo_loss(const PpoMinibatch& batch, const Mat& logits, const RowVec& values,
                 const PPOConfig& cfg) {
  const Eigen::Index b = logits.cols();
  if (static_cast<Eigen::Index>(batch.actions.size()) != b || batch.old_log_probs.size() != b ||
      batch.advantages.size() != b || batch.returns.size() != b || values.size() != b) {
    throw UsageError("ppo_loss: minibatch fields disagree in length");
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;

  PpoLoss out;
  out.grad_logits.resize(logits.rows(), b);
  out.grad_values.resize(b);
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clipped = 0.0;
  double kl = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const Vec logp = log_softmax(logits.col(j));
    const Vec p = logp.array().exp().matrix();
    const int a = batch.actions[static_cast<std::size_t>(j)];
    const double log_ratio = logp[a] - batch.old_log_probs[j];
    const double rho = std::exp(log_ratio);
    const double adv = batch.advantages[j];
    const double unclipped = rho * adv;
    const double clipped_obj = std::clamp(rho, lo, hi) * adv;
    // The unclipped branch carries gradient whenever it is the minimum.
    const bool use_unclipped = unclipped <= clipped_obj;
    surrogate += use_unclipped ? unclipped : clipped_obj;
    if (rho < lo || rho > hi) clipped += 1.0;
    kl += 0.5 * log_ratio * log_ratio;

    const double h = -p.dot(logp);
    entropy += h;

    // d/dlogits of -surrogate/B
    const double dsurr_dlogp = use_unclipped ? -adv * rho * inv_b : 0.0;
    Vec g = -dsurr_dlogp * p;
    g[a] += dsurr_dlogp;
    // d/dlogits of -entropy_coef * H / B, with dH/dz_k = -p_k (log p_k + H)
    g.array() += cfg.entropy_coef * inv_b * p.array() * (logp.array() + h);
    out.grad_logits.col(j) = g;

    const double diff = values[j] - batch.returns[j];
    value_loss += diff * diff;
    out.grad_values[j] = 2.0 * cfg.value_coef * diff * inv_b;
  }
  out.surrogate = -surrogate * inv_b;
  out.value = value_loss * inv_b;
  out.entropy = entropy * inv_b;
  out.clip_fraction = clipped * inv_b;
  out.approx_kl = kl * inv_b;
  out.total = out.surrogate + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
  return out;
}

}  // namespace poar::ppo

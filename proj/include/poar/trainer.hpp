#pragma once

// Simultaneous SRL + RL training with two optimizers sharing the encoder,
// plus the end-to-end PPO and decoupled-SRL baselines.
//
// Update loop (poar mode), per PPO epoch and minibatch:
//   1. encode, PPO loss, backpropagate, scale encoder gradients by alpha,
//      RL optimizer step at lr1;
//   2. re-encode, weighted SRL loss, backpropagate, SRL optimizer step at lr2.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poar/config.hpp"
#include "poar/env.hpp"
#include "poar/metrics.hpp"
#include "poar/model.hpp"
#include "poar/schedule.hpp"

namespace poar {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// One environment step. Only positions are stored; observations are
/// re-rendered on demand.
struct Frame {
  Eigen::Vector4d s_t = Eigen::Vector4d::Zero();   // agent xy, target xy before the step
  Eigen::Vector4d s_t1 = Eigen::Vector4d::Zero();  // after the step
  int action = 0;
  double reward = 0.0;
  bool done = false;
  double log_prob = 0.0;
  double value = 0.0;
};

/// Records are indexed t * n_envs + e.
struct Rollout {
  int n_envs = 0;
  int steps_per_env = 0;
  std::vector<Frame> frames;
  Vec bootstrap_values;  // value of each environment's state after the last step
  Vec advantages;
  Vec returns;
};

struct UpdateReport {
  std::int64_t update = 0;
  std::int64_t global_step = 0;
  std::int64_t episodes = 0;
  double lr1 = 0.0;
  double lr2 = 0.0;
  double ppo_total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  srl::SRLLossReport srl;  // minibatch means; zeros when no SRL step ran
};

struct PretrainEpoch {
  int epoch = 0;
  double reconstruction = 0.0;
  double total = 0.0;
};

struct SnapshotRecord {
  std::int64_t episode = 0;
  std::optional<double> mmd_domain;
  std::vector<double> explained_variance_ratio;
};

class Trainer {
 public:
  /// `demos` is required when srl.w_dr > 0.
  Trainer(RunConfig cfg, std::uint64_t seed, std::vector<env::DemoTrajectory> demos = {});
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// Decoupled mode: trains encoder and SRL heads on frames from a
  /// uniform-random policy; the encoder is frozen afterwards. Returns the
  /// per-epoch losses.
  const std::vector<PretrainEpoch>& pretrain();
  bool pretrained() const { return pretrained_; }

  /// Collects one rollout and optimizes on it.
  UpdateReport update();
  bool finished() const { return global_step_ >= cfg_.schedule.total_steps; }
  /// Runs updates until the step budget is spent (pretraining first in
  /// decoupled mode). `after_update` is called after every update.
  void run(const std::function<void(const UpdateReport&)>& after_update = {});

  /// Steps the environments with the current policy for one rollout.
  Rollout collect();
  /// GAE per environment into rollout.advantages / returns.
  void compute_advantages(Rollout& rollout) const;
  /// All epochs and minibatches on a collected rollout.
  UpdateReport train_step(Rollout& rollout);

  /// RL half of a minibatch update: PPO loss, backward, alpha scaling,
  /// clipping, RL optimizer step.
  ppo::PpoLoss rl_step(const Rollout& rollout, const std::vector<int>& idx, double lr1);
  /// SRL half of a minibatch update; no-op report when no weight is positive.
  srl::SRLLossReport srl_step(const Rollout& rollout, const std::vector<int>& idx, double lr2);

  /// Replaces both Adam optimizers with plain gradient descent.
  void use_plain_gradient_steps();

  /// Observation matrix for the given records (before or after the step).
  Mat observations(const Rollout& rollout, const std::vector<int>& idx, bool next) const;

  void set_snapshot_dir(std::string dir) { snapshot_dir_ = std::move(dir); }
  const std::vector<SnapshotRecord>& snapshots() const { return snapshot_log_; }

  void save_checkpoint(const std::string& path) const;
  /// Restores a checkpoint written by save_checkpoint. A configuration-hash
  /// mismatch throws ConfigError unless `allow_config_mismatch`.
  void load_checkpoint(const std::string& path, bool allow_config_mismatch = false);

  const RunConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  PoarModel& model() { return *model_; }
  const ParamRegistry& registry() const { return registry_; }
  nn::Optimizer& rl_optimizer() { return *opt_rl_; }
  nn::Optimizer* srl_optimizer() { return opt_srl_.get(); }
  const metrics::LearningCurve& curve() const { return curve_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t episodes() const { return episodes_; }
  std::int64_t updates() const { return updates_; }
  const std::vector<PretrainEpoch>& pretrain_log() const { return pretrain_log_; }
  const Mat& demo_coords() const { return demo_coords_; }
  /// Alpha actually applied to shared gradients (1 in ppo_baseline).
  double effective_alpha() const;
  bool encoder_trained_by_rl() const;

 private:
  void take_snapshot(std::int64_t episode);
  Mat demo_sample(Eigen::Index m);
  Mat encode_env_observations();

  RunConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<PoarModel> model_;
  ParamRegistry registry_;
  std::unique_ptr<nn::Optimizer> opt_rl_;
  std::unique_ptr<nn::Optimizer> opt_srl_;
  Mat demo_coords_;  // 2 x N, normalized to [-1, 1]

  std::vector<env::RobotEnv> envs_;
  std::vector<double> episode_reward_;
  Rng action_rng_;
  Rng shuffle_rng_;
  Rng demo_rng_;
  Rng pretrain_rng_;
  Rng snapshot_rng_;

  std::int64_t global_step_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t updates_ = 0;
  bool pretrained_ = false;
  metrics::LearningCurve curve_;
  std::vector<PretrainEpoch> pretrain_log_;
  std::vector<SnapshotRecord> snapshot_log_;
  std::string snapshot_dir_;
};

/// Normalized 2 x N matrix of every demo coordinate.
Mat pooled_demo_coords(const std::vector<env::DemoTrajectory>& demos, const env::WorkspaceConfig& ws);

struct CheckpointInfo {
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::int64_t global_step = 0;
  std::int64_t updates = 0;
};

/// Reads only the header of a checkpoint.
CheckpointInfo read_checkpoint_info(const std::string& path);

struct TrainOptions {
  bool overwrite = false;
  bool resume = false;
  bool allow_config_mismatch = false;
};

/// Demonstrations for a run: read from cfg.demo_path, or generated.
std::vector<env::DemoTrajectory> load_or_generate_demos(const RunConfig& cfg);

/// Trains one seed into seed_directory(cfg, seed): curve.csv, updates.csv,
/// checkpoint.bin (rewritten after every update), snapshots/, and
/// pretrain.csv in decoupled mode. Returns the final learning curve.
metrics::LearningCurve train_seed(const RunConfig& cfg, std::uint64_t seed, const TrainOptions& opts);

/// Writes the frozen config to <run_dir>/config.txt and trains every seed.
std::vector<metrics::LearningCurve> train_all(const RunConfig& cfg, const TrainOptions& opts);

}  // namespace poar

#include "poar/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poar/error.hpp"
#include "poar/stategraph.hpp"

namespace poar {

namespace fs = std::filesystem;

namespace {

// Seed streams derived from the run seed. Streams 0-2 initialize the model.
constexpr std::uint64_t kEnvStream = 3;
constexpr std::uint64_t kActionStream = 4;
constexpr std::uint64_t kShuffleStream = 5;
constexpr std::uint64_t kDemoStream = 6;
constexpr std::uint64_t kPretrainStream = 7;
constexpr std::uint64_t kSnapshotStream = 8;
constexpr std::uint64_t kPretrainEnvStream = 9;

void shuffle(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
}

Eigen::Vector4d positions(const env::EnvState& s) {
  return {s.agent_pos.x(), s.agent_pos.y(), s.target_pos.x(), s.target_pos.y()};
}

}  // namespace

Mat pooled_demo_coords(const std::vector<env::DemoTrajectory>& demos, const env::WorkspaceConfig& ws) {
  Eigen::Index n = 0;
  for (const auto& d : demos) n += static_cast<Eigen::Index>(d.coords.size());
  Mat out(2, n);
  Eigen::Index k = 0;
  for (const auto& d : demos) {
    for (const auto& c : d.coords) out.col(k++) = ws.normalize(c);
  }
  return out;
}

Trainer::Trainer(RunConfig cfg, std::uint64_t seed, std::vector<env::DemoTrajectory> demos)
    : cfg_(std::move(cfg)),
      seed_(seed),
      action_rng_(derive_seed(seed, kActionStream)),
      shuffle_rng_(derive_seed(seed, kShuffleStream)),
      demo_rng_(derive_seed(seed, kDemoStream)),
      pretrain_rng_(derive_seed(seed, kPretrainStream)),
      snapshot_rng_(derive_seed(seed, kSnapshotStream)) {
  cfg_.validate();
  model_ = std::make_unique<PoarModel>(cfg_.model_config(), seed);
  demo_coords_ = pooled_demo_coords(demos, cfg_.workspace);

  const ParamRole encoder_role = cfg_.mode == TrainMode::decoupled ? ParamRole::srl_only : ParamRole::shared;
  const nn::ParamList enc = model_->encoder().params();
  const nn::ParamList pol = model_->policy().params();
  registry_.add(enc, encoder_role);
  registry_.add(pol, ParamRole::rl_only);
  if (model_->has_srl()) {
    const nn::ParamList heads = model_->srl().params();
    registry_.add(heads, ParamRole::srl_only);
  }
  opt_rl_ = std::make_unique<nn::Adam>(registry_.rl_params());
  if (model_->has_srl()) opt_srl_ = std::make_unique<nn::Adam>(registry_.srl_params());

  const std::uint64_t env_base = derive_seed(seed, kEnvStream);
  for (int e = 0; e < cfg_.ppo.n_envs; ++e) {
    envs_.emplace_back(cfg_.env_id, cfg_.workspace, cfg_.omni);
    envs_.back().reset(derive_seed(env_base, static_cast<std::uint64_t>(e)));
  }
  episode_reward_.assign(envs_.size(), 0.0);
  curve_.seed = seed;
  curve_.run_id = cfg_.run_id;
}

Trainer::~Trainer() = default;

double Trainer::effective_alpha() const {
  return cfg_.mode == TrainMode::poar ? cfg_.schedule.alpha : 1.0;
}

bool Trainer::encoder_trained_by_rl() const { return cfg_.mode != TrainMode::decoupled; }

void Trainer::use_plain_gradient_steps() {
  opt_rl_ = std::make_unique<nn::Sgd>(registry_.rl_params());
  if (opt_srl_) opt_srl_ = std::make_unique<nn::Sgd>(registry_.srl_params());
}

Mat Trainer::observations(const Rollout& rollout, const std::vector<int>& idx, bool next) const {
  const int size = env::observation_size(cfg_.observation, cfg_.workspace);
  Mat out(size, static_cast<Eigen::Index>(idx.size()));
  env::EnvState s;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const Frame& f = rollout.frames[static_cast<std::size_t>(idx[j])];
    const Eigen::Vector4d& p = next ? f.s_t1 : f.s_t;
    s.agent_pos = p.head<2>();
    s.target_pos = p.tail<2>();
    out.col(static_cast<Eigen::Index>(j)) = env::observe(s, cfg_.workspace, cfg_.observation);
  }
  return out;
}

Mat Trainer::encode_env_observations() {
  const int size = env::observation_size(cfg_.observation, cfg_.workspace);
  Mat obs(size, static_cast<Eigen::Index>(envs_.size()));
  for (std::size_t e = 0; e < envs_.size(); ++e) {
    obs.col(static_cast<Eigen::Index>(e)) = env::observe(envs_[e].state(), cfg_.workspace, cfg_.observation);
  }
  return model_->encoder().forward(obs);
}

Mat Trainer::demo_sample(Eigen::Index m) {
  if (demo_coords_.cols() == 0) return Mat(2, 0);
  Mat out(demo_coords_.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto c = static_cast<Eigen::Index>(uniform01(demo_rng_) * static_cast<double>(demo_coords_.cols()));
    out.col(j) = demo_coords_.col(std::min(c, demo_coords_.cols() - 1));
  }
  return out;
}

Rollout Trainer::collect() {
  const int n = static_cast<int>(envs_.size());
  const int steps = cfg_.ppo.steps_per_env();
  Rollout r;
  r.n_envs = n;
  r.steps_per_env = steps;
  r.frames.resize(static_cast<std::size_t>(n) * steps);
  Mat states = encode_env_observations();
  for (int t = 0; t < steps; ++t) {
    const std::vector<ppo::ActResult> acts = model_->policy().act(states, action_rng_);
    for (int e = 0; e < n; ++e) {
      env::RobotEnv& env = envs_[static_cast<std::size_t>(e)];
      Frame& f = r.frames[static_cast<std::size_t>(t) * n + e];
      const auto& act = acts[static_cast<std::size_t>(e)];
      f.s_t = positions(env.state());
      f.action = act.action;
      f.log_prob = act.log_prob;
      f.value = act.value;
      const env::StepResult res = env.step(act.action);
      f.s_t1 = positions(env.state());
      f.reward = res.reward;
      f.done = res.done;
      ++global_step_;
      episode_reward_[static_cast<std::size_t>(e)] += res.reward;
      if (res.done) {
        ++episodes_;
        curve_.points.push_back({global_step_, episodes_, episode_reward_[static_cast<std::size_t>(e)]});
        episode_reward_[static_cast<std::size_t>(e)] = 0.0;
        env.reset();
        if (cfg_.snapshot_interval > 0 && episodes_ % cfg_.snapshot_interval == 0) take_snapshot(episodes_);
      }
    }
    states = encode_env_observations();
  }
  const ppo::PolicyOutput last = model_->policy().forward(states);
  r.bootstrap_values = last.values.transpose();
  return r;
}

void Trainer::compute_advantages(Rollout& r) const {
  const int n = r.n_envs;
  const int steps = r.steps_per_env;
  r.advantages.resize(static_cast<Eigen::Index>(r.frames.size()));
  r.returns.resize(static_cast<Eigen::Index>(r.frames.size()));
  Vec rewards(steps);
  Vec values(steps);
  std::vector<std::uint8_t> dones(static_cast<std::size_t>(steps));
  for (int e = 0; e < n; ++e) {
    for (int t = 0; t < steps; ++t) {
      const Frame& f = r.frames[static_cast<std::size_t>(t) * n + e];
      rewards[t] = f.reward;
      values[t] = f.value;
      dones[static_cast<std::size_t>(t)] = f.done ? 1 : 0;
    }
    const ppo::GaeResult g =
        ppo::compute_gae(rewards, values, dones, r.bootstrap_values[e], cfg_.ppo.gamma, cfg_.ppo.gae_lambda);
    for (int t = 0; t < steps; ++t) {
      r.advantages[static_cast<Eigen::Index>(t) * n + e] = g.advantages[t];
      r.returns[static_cast<Eigen::Index>(t) * n + e] = g.returns[t];
    }
  }
}

ppo::PpoLoss Trainer::rl_step(const Rollout& r, const std::vector<int>& idx, double lr1) {
  nn::zero_grad(registry_.all());
  const Mat obs = observations(r, idx, false);
  const Mat states = model_->encoder().forward(obs);
  const ppo::PolicyOutput out = model_->policy().forward(states);

  ppo::PpoMinibatch mb;
  const auto b = static_cast<Eigen::Index>(idx.size());
  mb.actions.resize(idx.size());
  mb.old_log_probs.resize(b);
  mb.advantages.resize(b);
  mb.returns.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto i = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
    mb.actions[static_cast<std::size_t>(j)] = r.frames[i].action;
    mb.old_log_probs[j] = r.frames[i].log_prob;
    mb.advantages[j] = r.advantages[static_cast<Eigen::Index>(i)];
    mb.returns[j] = r.returns[static_cast<Eigen::Index>(i)];
  }
  ppo::normalize_advantages(mb.advantages);

  ppo::PpoLoss loss = ppo::ppo_loss(mb, out.logits, out.values, cfg_.ppo);
  const Mat grad_states = model_->policy().backward(loss.grad_logits, loss.grad_values);
  if (encoder_trained_by_rl()) model_->encoder().backward(grad_states);
  scale_shared_gradients(registry_, effective_alpha());
  if (cfg_.ppo.max_grad_norm > 0.0) nn::clip_grad_norm(opt_rl_->params(), cfg_.ppo.max_grad_norm);
  opt_rl_->step(lr1);
  return loss;
}

srl::SRLLossReport Trainer::srl_step(const Rollout& r, const std::vector<int>& idx, double lr2) {
  if (!model_->has_srl() || !cfg_.weights.any()) return {};
  nn::zero_grad(registry_.all());
  srl::SrlBatch batch;
  batch.obs_t = observations(r, idx, false);
  batch.obs_t1 = observations(r, idx, true);
  const auto b = static_cast<Eigen::Index>(idx.size());
  batch.actions.resize(idx.size());
  batch.rewards.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Frame& f = r.frames[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
    batch.actions[static_cast<std::size_t>(j)] = f.action;
    batch.rewards[j] = f.reward;
  }
  const Mat demos = cfg_.weights.dr > 0 ? demo_sample(b) : Mat(2, 0);
  const srl::SRLLossReport rep = model_->srl().total_loss(model_->encoder(), batch, demos, cfg_.weights, true);
  opt_srl_->step(lr2);
  return rep;
}

UpdateReport Trainer::train_step(Rollout& r) {
  compute_advantages(r);
  const auto batch = static_cast<std::int64_t>(r.frames.size());
  const std::int64_t n = std::clamp<std::int64_t>(global_step_ - batch + 1, 1, cfg_.schedule.total_steps);
  const LearningRates lr = lr_schedule(n, cfg_.schedule);
  const bool srl_active = cfg_.mode == TrainMode::poar && model_->has_srl() && cfg_.weights.any();

  UpdateReport rep;
  rep.lr1 = lr.lr1;
  rep.lr2 = srl_active ? lr.lr2 : 0.0;
  std::vector<int> order(r.frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const int mbs = cfg_.ppo.minibatches;
  const std::size_t mb_size = order.size() / static_cast<std::size_t>(mbs);
  int count = 0;
  for (int epoch = 0; epoch < cfg_.ppo.epochs; ++epoch) {
    shuffle(order, shuffle_rng_);
    for (int k = 0; k < mbs; ++k) {
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(k * mb_size),
                                 order.begin() + static_cast<std::ptrdiff_t>((k + 1) * mb_size));
      const ppo::PpoLoss l = rl_step(r, idx, lr.lr1);
      rep.ppo_total += l.total;
      rep.surrogate += l.surrogate;
      rep.value_loss += l.value;
      rep.entropy += l.entropy;
      rep.approx_kl += l.approx_kl;
      rep.clip_fraction += l.clip_fraction;
      if (srl_active) {
        const srl::SRLLossReport s = srl_step(r, idx, lr.lr2);
        rep.srl.ae += s.ae;
        rep.srl.rw += s.rw;
        rep.srl.iv += s.iv;
        rep.srl.fw += s.fw;
        rep.srl.dr += s.dr;
        rep.srl.total += s.total;
      }
      ++count;
    }
  }
  const double inv = 1.0 / count;
  rep.ppo_total *= inv;
  rep.surrogate *= inv;
  rep.value_loss *= inv;
  rep.entropy *= inv;
  rep.approx_kl *= inv;
  rep.clip_fraction *= inv;
  rep.srl.ae *= inv;
  rep.srl.rw *= inv;
  rep.srl.iv *= inv;
  rep.srl.fw *= inv;
  rep.srl.dr *= inv;
  rep.srl.total *= inv;
  ++updates_;
  rep.update = updates_;
  rep.global_step = global_step_;
  rep.episodes = episodes_;
  return rep;
}

const std::vector<PretrainEpoch>& Trainer::pretrain() {
  if (cfg_.mode != TrainMode::decoupled) throw UsageError("pretrain: only available in decoupled mode");
  if (pretrained_) return pretrain_log_;
  const int n = cfg_.ppo.n_envs;
  const int samples = cfg_.decoupled.pretrain_samples;
  std::vector<env::RobotEnv> envs;
  const std::uint64_t base = derive_seed(seed_, kPretrainEnvStream);
  for (int e = 0; e < n; ++e) {
    envs.emplace_back(cfg_.env_id, cfg_.workspace, cfg_.omni);
    envs.back().reset(derive_seed(base, static_cast<std::uint64_t>(e)));
  }
  Rollout frames;
  frames.frames.reserve(static_cast<std::size_t>(samples));
  while (static_cast<int>(frames.frames.size()) < samples) {
    for (auto& env : envs) {
      if (static_cast<int>(frames.frames.size()) >= samples) break;
      Frame f;
      f.s_t = positions(env.state());
      f.action = std::min(env::kNumActions - 1, static_cast<int>(uniform01(pretrain_rng_) * env::kNumActions));
      const env::StepResult res = env.step(f.action);
      f.s_t1 = positions(env.state());
      f.reward = res.reward;
      f.done = res.done;
      if (res.done) env.reset();
      frames.frames.push_back(f);
    }
  }

  std::vector<int> order(frames.frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const auto bs = static_cast<std::size_t>(cfg_.decoupled.batch_size);
  for (int epoch = 1; epoch <= cfg_.decoupled.pretrain_epochs; ++epoch) {
    shuffle(order, pretrain_rng_);
    PretrainEpoch log;
    log.epoch = epoch;
    double seen = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const srl::SRLLossReport rep = srl_step(frames, idx, cfg_.schedule.lr2);
      const double w = static_cast<double>(idx.size());
      log.reconstruction += w * rep.ae;
      log.total += w * rep.total;
      seen += w;
    }
    log.reconstruction /= seen;
    log.total /= seen;
    spdlog::info("pretrain epoch {}/{}: reconstruction {:.4f} total {:.4f}", epoch, cfg_.decoupled.pretrain_epochs,
                 log.reconstruction, log.total);
    pretrain_log_.push_back(log);
  }
  pretrained_ = true;
  return pretrain_log_;
}

UpdateReport Trainer::update() {
  if (cfg_.mode == TrainMode::decoupled && !pretrained_) pretrain();
  Rollout r = collect();
  return train_step(r);
}

void Trainer::run(const std::function<void(const UpdateReport&)>& after_update) {
  if (cfg_.mode == TrainMode::decoupled && !pretrained_) pretrain();
  while (!finished()) {
    const UpdateReport rep = update();
    if (after_update) after_update(rep);
  }
}

void Trainer::take_snapshot(std::int64_t episode) {
  stategraph::RolloutSource src{cfg_.env_id, cfg_.workspace, cfg_.omni, cfg_.observation};
  const bool recon = model_->has_srl() && cfg_.weights.ae > 0 && !snapshot_dir_.empty();
  Mat kept;
  const stategraph::StateSnapshot snap = stategraph::collect_snapshot(
      *model_, src, cfg_.snapshot_steps, snapshot_rng_, episode, recon ? cfg_.snapshot_images : 0, &kept);
  SnapshotRecord rec;
  rec.episode = episode;
  std::optional<stategraph::ProjectionResult> proj;
  try {
    proj = stategraph::pca_project(snap, 2);
    rec.explained_variance_ratio.assign(proj->explained_variance_ratio.data(),
                                        proj->explained_variance_ratio.data() + proj->explained_variance_ratio.size());
  } catch (const DegenerateInputError& e) {
    spdlog::warn("snapshot at episode {}: {}", episode, e.what());
  }
  if (demo_coords_.cols() > 0 && cfg_.split.dim_domain == demo_coords_.rows()) {
    rec.mmd_domain = stategraph::domain_mmd(snap, cfg_.split, demo_coords_, snapshot_rng_);
  }
  if (!snapshot_dir_.empty()) {
    stategraph::SnapshotMeta meta{env::to_string(cfg_.env_id), cfg_.weights.shorthand(), cfg_.split, rec.mmd_domain};
    stategraph::write_snapshot(snapshot_dir_, snap, meta, proj ? &*proj : nullptr);
    if (proj) stategraph::write_projection(snapshot_dir_, episode, *proj, snap.rewards, cfg_.env_id == env::EnvId::mobile);
    if (recon && kept.cols() > 0) {
      stategraph::export_reconstructions(model_->encoder(), &model_->srl(), kept, cfg_.workspace.image_size,
                                         snapshot_dir_, "recon_" + stategraph::episode_tag(episode));
    }
  }
  snapshot_log_.push_back(std::move(rec));
}

// ---------------------------------------------------------------- orchestration

std::vector<env::DemoTrajectory> load_or_generate_demos(const RunConfig& cfg) {
  if (!cfg.demo_path.empty()) return env::read_demos(cfg.demo_path);
  return env::generate_demos(cfg.env_id, cfg.demo_count, cfg.demo_seed, cfg.workspace, cfg.omni);
}

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string curve_text(const metrics::LearningCurve& c) {
  std::string s = "global_step,episode,reward\n";
  for (const auto& p : c.points) s += fmt::format("{},{},{}\n", p.global_step, p.episode, p.reward);
  return s;
}

constexpr const char* kUpdatesHeader =
    "update,global_step,episodes,lr1,lr2,ppo_total,surrogate,value_loss,entropy,approx_kl,clip_fraction,"
    "srl_total,srl_ae,srl_rw,srl_iv,srl_fw,srl_dr";

std::string update_row(const UpdateReport& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.update, r.global_step, r.episodes, r.lr1,
                     r.lr2, r.ppo_total, r.surrogate, r.value_loss, r.entropy, r.approx_kl, r.clip_fraction,
                     r.srl.total, r.srl.ae, r.srl.rw, r.srl.iv, r.srl.fw, r.srl.dr);
}

/// Keeps the header and rows for updates <= `keep`.
std::string truncated_updates_log(const fs::path& path, std::int64_t keep) {
  std::string out = std::string(kUpdatesHeader) + "\n";
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= keep) out += line + "\n";
  }
  return out;
}

}  // namespace

metrics::LearningCurve train_seed(const RunConfig& cfg, std::uint64_t seed, const TrainOptions& opts) {
  const fs::path dir = seed_directory(cfg, seed);
  const fs::path ckpt = dir / "checkpoint.bin";
  const bool exists = fs::exists(ckpt);
  if (exists && !opts.resume && !opts.overwrite) {
    throw UsageError("checkpoint '" + ckpt.string() + "' already exists (pass --overwrite or --resume)");
  }
  if (exists && opts.overwrite && !opts.resume) fs::remove_all(dir);
  fs::create_directories(dir);

  std::vector<env::DemoTrajectory> demos;
  if (cfg.weights.dr > 0) demos = load_or_generate_demos(cfg);
  Trainer trainer(cfg, seed, std::move(demos));
  trainer.set_snapshot_dir((dir / "snapshots").string());

  const fs::path updates_path = dir / "updates.csv";
  std::string updates_log = std::string(kUpdatesHeader) + "\n";
  if (exists && opts.resume) {
    trainer.load_checkpoint(ckpt.string(), opts.allow_config_mismatch);
    updates_log = truncated_updates_log(updates_path, trainer.updates());
    spdlog::info("seed {}: resumed at step {} (update {})", seed, trainer.global_step(), trainer.updates());
  }
  if (cfg.mode == TrainMode::decoupled && !trainer.pretrained()) {
    trainer.pretrain();
    std::string text = "epoch,reconstruction,total\n";
    for (const auto& e : trainer.pretrain_log()) text += fmt::format("{},{},{}\n", e.epoch, e.reconstruction, e.total);
    write_text_atomic(dir / "pretrain.csv", text);
    if (cfg.checkpoints) trainer.save_checkpoint(ckpt.string());
  }

  trainer.run([&](const UpdateReport& r) {
    const auto& pts = trainer.curve().points;
    double recent = 0.0;
    const std::size_t k = std::min<std::size_t>(pts.size(), 10);
    for (std::size_t i = pts.size() - k; i < pts.size(); ++i) recent += pts[i].reward;
    if (k > 0) recent /= static_cast<double>(k);
    spdlog::info("seed {} update {} step {} episodes {} reward(last {}) {:.2f} ppo {:.4f} srl {:.4f} lr1 {:.2e} lr2 {:.2e}",
                 seed, r.update, r.global_step, r.episodes, k, recent, r.ppo_total, r.srl.total, r.lr1, r.lr2);
    write_text_atomic(dir / "curve.csv", curve_text(trainer.curve()));
    updates_log += update_row(r) + "\n";
    write_text_atomic(updates_path, updates_log);
    if (cfg.checkpoints) trainer.save_checkpoint(ckpt.string());
  });
  write_text_atomic(dir / "curve.csv", curve_text(trainer.curve()));
  return trainer.curve();
}

std::vector<metrics::LearningCurve> train_all(const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const fs::path run_dir = run_directory(cfg);
  if (!opts.resume && !opts.overwrite) {
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path ckpt = fs::path(seed_directory(cfg, seed)) / "checkpoint.bin";
      if (fs::exists(ckpt)) {
        throw UsageError("checkpoint '" + ckpt.string() + "' already exists (pass --overwrite or --resume)");
      }
    }
  }
  if (opts.resume && fs::exists(run_dir / "config.txt") && !opts.allow_config_mismatch) {
    const RunConfig frozen = parse_config_text(read_text(run_dir / "config.txt"));
    if (config_hash(frozen) != config_hash(cfg)) {
      throw ConfigError("configuration differs from the frozen '" + (run_dir / "config.txt").string() +
                        "' (pass --force to resume anyway)");
    }
  }
  fs::create_directories(run_dir);
  write_text_atomic(run_dir / "config.txt", emit_config(cfg));
  std::vector<metrics::LearningCurve> curves;
  for (std::uint64_t seed : cfg.seeds) curves.push_back(train_seed(cfg, seed, opts));
  return curves;
}

}  // namespace poar

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include <filesystem>
#include <fstream>

#include "poar/error.hpp"
#include "poar/trainer.hpp"

namespace poar {

namespace {

constexpr const char* kMagic = "poar-checkpoint";
constexpr std::uint32_t kVersion = 1;

std::vector<double> flat(const Mat& m) { return {m.data(), m.data() + m.size()}; }

void unflat(const std::vector<double>& v, Mat& m, const std::string& what) {
  if (static_cast<Eigen::Index>(v.size()) != m.size()) throw ConfigError("checkpoint: size mismatch for " + what);
  std::copy(v.begin(), v.end(), m.data());
}

enum OptimizerKind : std::uint8_t { kNone = 0, kAdam = 1, kSgd = 2 };

template <class Archive>
void save_optimizer(Archive& ar, nn::Optimizer* opt) {
  std::uint8_t kind = kNone;
  auto* adam = dynamic_cast<nn::Adam*>(opt);
  if (adam != nullptr) {
    kind = kAdam;
  } else if (opt != nullptr) {
    kind = kSgd;
  }
  ar(kind);
  if (adam == nullptr) return;
  ar(static_cast<std::int64_t>(adam->step_count()));
  const auto n = static_cast<std::uint64_t>(adam->first_moments().size());
  ar(n);
  for (std::size_t i = 0; i < n; ++i) ar(flat(adam->first_moments()[i]), flat(adam->second_moments()[i]));
}

template <class Archive>
void load_optimizer(Archive& ar, nn::Optimizer* opt, const char* which) {
  std::uint8_t kind = kNone;
  ar(kind);
  auto* adam = dynamic_cast<nn::Adam*>(opt);
  const std::uint8_t expected = adam != nullptr ? kAdam : (opt != nullptr ? kSgd : kNone);
  if (kind != expected) throw ConfigError(std::string("checkpoint: ") + which + " optimizer type differs");
  if (adam == nullptr) return;
  std::int64_t t = 0;
  std::uint64_t n = 0;
  ar(t, n);
  if (n != adam->first_moments().size()) throw ConfigError(std::string("checkpoint: ") + which + " optimizer shape differs");
  adam->set_step_count(static_cast<long>(t));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> m;
    std::vector<double> v;
    ar(m, v);
    unflat(m, adam->first_moments()[i], "optimizer moment");
    unflat(v, adam->second_moments()[i], "optimizer moment");
  }
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint '" + tmp + "'");
    cereal::PortableBinaryOutputArchive ar(os);
    ar(std::string(kMagic), kVersion, emit_config(cfg_), config_hash(cfg_), seed_);
    ar(global_step_, episodes_, updates_, pretrained_);

    const nn::ParamList params = model_->all_params();
    ar(static_cast<std::uint64_t>(params.size()));
    for (const auto* p : params) {
      ar(p->name, static_cast<std::int64_t>(p->value.rows()), static_cast<std::int64_t>(p->value.cols()), flat(p->value));
    }
    save_optimizer(ar, opt_rl_.get());
    save_optimizer(ar, opt_srl_.get());

    ar(save_rng(action_rng_), save_rng(shuffle_rng_), save_rng(demo_rng_), save_rng(pretrain_rng_),
       save_rng(snapshot_rng_));

    ar(static_cast<std::uint64_t>(envs_.size()));
    for (std::size_t e = 0; e < envs_.size(); ++e) {
      const env::RobotEnv& env = envs_[e];
      const env::EnvState& s = env.state();
      std::vector<double> history;
      for (const auto& h : s.history) {
        history.push_back(h.x());
        history.push_back(h.y());
      }
      ar(s.agent_pos.x(), s.agent_pos.y(), s.target_pos.x(), s.target_pos.y(), s.step_index, history, env.done(),
         save_rng(env.rng()), episode_reward_[e]);
    }

    std::vector<std::int64_t> steps;
    std::vector<std::int64_t> eps;
    std::vector<double> rewards;
    for (const auto& p : curve_.points) {
      steps.push_back(p.global_step);
      eps.push_back(p.episode);
      rewards.push_back(p.reward);
    }
    ar(steps, eps, rewards);

    ar(static_cast<std::uint64_t>(pretrain_log_.size()));
    for (const auto& e : pretrain_log_) ar(e.epoch, e.reconstruction, e.total);
    ar(static_cast<std::uint64_t>(snapshot_log_.size()));
    for (const auto& s : snapshot_log_) {
      ar(s.episode, s.mmd_domain.has_value(), s.mmd_domain.value_or(0.0), s.explained_variance_ratio);
    }
    if (!os) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::string& path, bool allow_config_mismatch) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  cereal::PortableBinaryInputArchive ar(is);
  try {
    std::string magic;
    std::uint32_t version = 0;
    std::string cfg_text;
    std::uint64_t hash = 0;
    std::uint64_t seed = 0;
    ar(magic, version);
    if (magic != kMagic) throw IoError("'" + path + "' is not a checkpoint");
    if (version != kVersion) throw IoError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
    ar(cfg_text, hash, seed);
    if (hash != config_hash(cfg_) && !allow_config_mismatch) {
      throw ConfigError("checkpoint '" + path + "' was written with a different configuration (hash mismatch)");
    }
    if (seed != seed_) throw ConfigError("checkpoint '" + path + "' belongs to seed " + std::to_string(seed));
    ar(global_step_, episodes_, updates_, pretrained_);

    const nn::ParamList params = model_->all_params();
    std::uint64_t count = 0;
    ar(count);
    if (count != params.size()) throw ConfigError("checkpoint: parameter count differs from the model");
    for (auto* p : params) {
      std::string name;
      std::int64_t rows = 0;
      std::int64_t cols = 0;
      std::vector<double> values;
      ar(name, rows, cols, values);
      if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
        throw ConfigError("checkpoint: parameter '" + name + "' does not match model parameter '" + p->name + "'");
      }
      unflat(values, p->value, p->name);
    }
    load_optimizer(ar, opt_rl_.get(), "RL");
    load_optimizer(ar, opt_srl_.get(), "SRL");

    std::string a, s, d, pr, sn;
    ar(a, s, d, pr, sn);
    load_rng(action_rng_, a);
    load_rng(shuffle_rng_, s);
    load_rng(demo_rng_, d);
    load_rng(pretrain_rng_, pr);
    load_rng(snapshot_rng_, sn);

    std::uint64_t n_envs = 0;
    ar(n_envs);
    if (n_envs != envs_.size()) throw ConfigError("checkpoint: environment count differs");
    for (std::size_t e = 0; e < envs_.size(); ++e) {
      env::EnvState st;
      double ax = 0, ay = 0, tx = 0, ty = 0;
      std::vector<double> history;
      bool done = false;
      std::string rng;
      ar(ax, ay, tx, ty, st.step_index, history, done, rng, episode_reward_[e]);
      st.agent_pos = {ax, ay};
      st.target_pos = {tx, ty};
      for (std::size_t k = 0; k + 1 < history.size(); k += 2) st.history.emplace_back(history[k], history[k + 1]);
      envs_[e].set_state(st);
      envs_[e].set_done(done);
      load_rng(envs_[e].rng(), rng);
    }

    std::vector<std::int64_t> steps;
    std::vector<std::int64_t> eps;
    std::vector<double> rewards;
    ar(steps, eps, rewards);
    curve_.points.clear();
    for (std::size_t i = 0; i < steps.size(); ++i) curve_.points.push_back({steps[i], eps[i], rewards[i]});

    std::uint64_t n = 0;
    ar(n);
    pretrain_log_.assign(n, {});
    for (auto& e : pretrain_log_) ar(e.epoch, e.reconstruction, e.total);
    ar(n);
    snapshot_log_.assign(n, {});
    for (auto& r : snapshot_log_) {
      bool has = false;
      double v = 0.0;
      ar(r.episode, has, v, r.explained_variance_ratio);
      if (has) r.mmd_domain = v;
    }
  } catch (const cereal::Exception& e) {
    throw IoError("checkpoint '" + path + "' is truncated or corrupt: " + e.what());
  }
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  cereal::PortableBinaryInputArchive ar(is);
  CheckpointInfo info;
  try {
    std::string magic;
    std::uint32_t version = 0;
    ar(magic, version);
    if (magic != kMagic || version != kVersion) throw IoError("'" + path + "' is not a supported checkpoint");
    bool pretrained = false;
    std::int64_t episodes = 0;
    ar(info.config_text, info.config_hash, info.seed, info.global_step, episodes, info.updates, pretrained);
  } catch (const cereal::Exception& e) {
    throw IoError("checkpoint '" + path + "' is truncated or corrupt: " + e.what());
  }
  return info;
}

}  // namespace poar

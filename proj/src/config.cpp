#include "poar/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "poar/error.hpp"

namespace poar {

TrainMode parse_train_mode(std::string_view s) {
  if (s == "poar") return TrainMode::poar;
  if (s == "ppo_baseline" || s == "ppo") return TrainMode::ppo_baseline;
  if (s == "decoupled") return TrainMode::decoupled;
  throw ConfigError("train.mode: unknown value '" + std::string(s) +
                    "' (expected poar|ppo_baseline|decoupled)");
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::poar: return "poar";
    case TrainMode::ppo_baseline: return "ppo_baseline";
    case TrainMode::decoupled: return "decoupled";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  v = trim(v);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(v) + "' as a number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true|false, got '" + std::string(v) + "'");
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view v) {
  std::vector<T> out;
  v = trim(v);
  if (v.empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_number<T>(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  return fmt::format("{}", fmt::join(xs, ","));
}

std::string num(double x) { return fmt::format("{}", x); }
std::string num(std::int64_t x) { return std::to_string(x); }
std::string num(int x) { return std::to_string(x); }
std::string num(std::uint64_t x) { return std::to_string(x); }
std::string flag(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;  // empty for input-only keys
};

#define POAR_DOUBLE(KEY, FIELD)                                                                  \
  Key {                                                                                          \
    KEY, [](RunConfig& c, std::string_view v) { c.FIELD = parse_number<double>(KEY, v); },      \
        [](const RunConfig& c) { return num(c.FIELD); }                                          \
  }
#define POAR_INT(KEY, FIELD)                                                                     \
  Key {                                                                                          \
    KEY, [](RunConfig& c, std::string_view v) { c.FIELD = parse_number<int>(KEY, v); },         \
        [](const RunConfig& c) { return num(c.FIELD); }                                          \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = {
      {"env.id", [](RunConfig& c, std::string_view v) { c.env_id = env::parse_env_id(trim(v)); },
       [](const RunConfig& c) { return env::to_string(c.env_id); }},
      {"env.observation",
       [](RunConfig& c, std::string_view v) { c.observation = env::parse_observation_kind(trim(v)); },
       [](const RunConfig& c) { return env::to_string(c.observation); }},
      POAR_DOUBLE("env.bounds_lo", workspace.lo),
      POAR_DOUBLE("env.bounds_hi", workspace.hi),
      POAR_INT("env.image_size", workspace.image_size),
      POAR_INT("env.episode_length", workspace.episode_length),
      POAR_DOUBLE("env.step_size", workspace.step_size),
      POAR_DOUBLE("env.target_radius", workspace.target_radius),
      POAR_DOUBLE("omni.lambda", omni.lambda),
      POAR_DOUBLE("omni.radius", omni.radius),
      POAR_INT("omni.lag", omni.lag),
      POAR_DOUBLE("omni.bump_penalty", omni.bump_penalty),

      {"train.mode", [](RunConfig& c, std::string_view v) { c.mode = parse_train_mode(trim(v)); },
       [](const RunConfig& c) { return to_string(c.mode); }},
      {"train.total_steps",
       [](RunConfig& c, std::string_view v) {
         c.schedule.total_steps = parse_number<std::int64_t>("train.total_steps", v);
       },
       [](const RunConfig& c) { return num(c.schedule.total_steps); }},
      {"train.demo_path", [](RunConfig& c, std::string_view v) { c.demo_path = std::string(trim(v)); },
       [](const RunConfig& c) { return c.demo_path; }},
      POAR_INT("train.demo_count", demo_count),
      {"train.demo_seed",
       [](RunConfig& c, std::string_view v) { c.demo_seed = parse_number<std::uint64_t>("train.demo_seed", v); },
       [](const RunConfig& c) { return num(c.demo_seed); }},
      POAR_INT("train.snapshot_interval", snapshot_interval),
      POAR_INT("train.snapshot_steps", snapshot_steps),
      POAR_INT("train.snapshot_images", snapshot_images),
      {"train.checkpoints",
       [](RunConfig& c, std::string_view v) { c.checkpoints = parse_bool("train.checkpoints", v); },
       [](const RunConfig& c) { return flag(c.checkpoints); }},

      {"srl.weights",
       [](RunConfig& c, std::string_view v) { c.weights = srl::SRLWeights::parse(trim(v)); }, nullptr},
      POAR_DOUBLE("srl.w_ae", weights.ae),
      POAR_DOUBLE("srl.w_rw", weights.rw),
      POAR_DOUBLE("srl.w_iv", weights.iv),
      POAR_DOUBLE("srl.w_fw", weights.fw),
      POAR_DOUBLE("srl.w_dr", weights.dr),
      POAR_INT("srl.dim_reward", split.dim_reward),
      POAR_INT("srl.dim_inverse", split.dim_inverse),
      POAR_INT("srl.dim_forward", split.dim_forward),
      POAR_INT("srl.dim_domain", split.dim_domain),
      {"srl.mode", [](RunConfig& c, std::string_view v) { c.split.mode = srl::parse_split_mode(trim(v)); },
       [](const RunConfig& c) { return srl::to_string(c.split.mode); }},
      POAR_INT("srl.hidden", srl_hidden),

      {"encoder.channels",
       [](RunConfig& c, std::string_view v) { c.encoder_channels = parse_list<int>("encoder.channels", v); },
       [](const RunConfig& c) { return join(c.encoder_channels); }},
      POAR_INT("encoder.kernel", encoder_kernel),
      POAR_INT("encoder.stride", encoder_stride),

      POAR_DOUBLE("schedule.lr1", schedule.lr1),
      POAR_DOUBLE("schedule.lr2", schedule.lr2),
      POAR_DOUBLE("schedule.alpha", schedule.alpha),
      POAR_DOUBLE("schedule.beta", schedule.beta),
      {"schedule.lr2_literal",
       [](RunConfig& c, std::string_view v) { c.schedule.lr2_literal = parse_bool("schedule.lr2_literal", v); },
       [](const RunConfig& c) { return flag(c.schedule.lr2_literal); }},

      POAR_DOUBLE("ppo.gamma", ppo.gamma),
      POAR_DOUBLE("ppo.gae_lambda", ppo.gae_lambda),
      POAR_DOUBLE("ppo.clip_epsilon", ppo.clip_epsilon),
      POAR_DOUBLE("ppo.value_coef", ppo.value_coef),
      POAR_DOUBLE("ppo.entropy_coef", ppo.entropy_coef),
      POAR_INT("ppo.epochs", ppo.epochs),
      POAR_INT("ppo.minibatches", ppo.minibatches),
      POAR_INT("ppo.steps_per_update", ppo.steps_per_update),
      POAR_INT("ppo.n_envs", ppo.n_envs),
      POAR_DOUBLE("ppo.max_grad_norm", ppo.max_grad_norm),
      {"ppo.hidden", [](RunConfig& c, std::string_view v) { c.ppo.hidden = parse_list<int>("ppo.hidden", v); },
       [](const RunConfig& c) { return join(c.ppo.hidden); }},

      POAR_INT("decoupled.pretrain_samples", decoupled.pretrain_samples),
      POAR_INT("decoupled.pretrain_epochs", decoupled.pretrain_epochs),
      POAR_INT("decoupled.batch_size", decoupled.batch_size),

      {"run.seeds",
       [](RunConfig& c, std::string_view v) { c.seeds = parse_list<std::uint64_t>("run.seeds", v); },
       [](const RunConfig& c) { return join(c.seeds); }},
      {"run.output_dir", [](RunConfig& c, std::string_view v) { c.output_dir = std::string(trim(v)); },
       [](const RunConfig& c) { return c.output_dir; }},
      {"run.id", [](RunConfig& c, std::string_view v) { c.run_id = std::string(trim(v)); },
       [](const RunConfig& c) { return c.run_id; }},
  };
  return table;
}

#undef POAR_DOUBLE
#undef POAR_INT

}  // namespace

void RunConfig::validate() const {
  workspace.validate();
  if (env_id == env::EnvId::omni) {
    omni.validate(workspace);
    if (!workspace.contains(env::Vec2::Zero())) throw ConfigError("env.bounds: omni requires the origin inside bounds");
  }
  schedule.validate();
  ppo.validate();
  split.validate();
  weights.validate(mode == TrainMode::decoupled);
  if (mode == TrainMode::ppo_baseline && weights.any()) {
    throw ConfigError("srl.weights: ppo_baseline trains no SRL heads; weights must be none");
  }
  if (observation == env::ObservationKind::coords && mode != TrainMode::ppo_baseline) {
    throw ConfigError("env.observation: coords observations are only valid with train.mode=ppo_baseline");
  }
  if (weights.dr > 0 && split.dim_domain != 2) {
    throw ConfigError("srl.dim_domain: must be 2 (demo coordinates are 2-d) when srl.w_dr > 0");
  }
  if (srl_hidden < 1) throw ConfigError("srl.hidden: must be >= 1");
  if (mode == TrainMode::decoupled) {
    if (decoupled.pretrain_samples < 1) throw ConfigError("decoupled.pretrain_samples: must be >= 1");
    if (decoupled.pretrain_epochs < 1) throw ConfigError("decoupled.pretrain_epochs: must be >= 1");
    if (decoupled.batch_size < 1) throw ConfigError("decoupled.batch_size: must be >= 1");
  }
  if (observation == env::ObservationKind::pixels) model_config().encoder.validate();
  if (demo_count < 1) throw ConfigError("train.demo_count: must be >= 1");
  if (snapshot_interval < 0) throw ConfigError("train.snapshot_interval: must be >= 0");
  if (snapshot_steps < 2) throw ConfigError("train.snapshot_steps: must be >= 2");
  if (snapshot_images < 0) throw ConfigError("train.snapshot_images: must be >= 0");
  if (seeds.empty()) throw ConfigError("run.seeds: at least one seed required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) {
      if (seeds[i] == seeds[j]) throw ConfigError("run.seeds: duplicate seed " + std::to_string(seeds[i]));
    }
  }
  if (output_dir.empty()) throw ConfigError("run.output_dir: must not be empty");
  if (run_id.empty() || run_id.find('/') != std::string::npos) {
    throw ConfigError("run.id: must be a non-empty name without '/'");
  }
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.split = split;
  m.srl_hidden = srl_hidden;
  m.policy_hidden = ppo.hidden;
  if (observation == env::ObservationKind::coords) {
    m.encoder.channels.clear();
    m.encoder.input_dim = env::observation_size(observation, workspace);
    m.with_srl = false;
  } else {
    m.encoder.image_size = workspace.image_size;
    m.encoder.channels = encoder_channels;
    m.encoder.kernel = encoder_kernel;
    m.encoder.stride = encoder_stride;
    m.encoder.latent_dim = split.total();
    m.with_srl = mode != TrainMode::ppo_baseline;
  }
  return m;
}

RunConfig default_config() {
  RunConfig c;
  if (const char* root = std::getenv("POAR_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    c.output_dir = root;
  }
  return c;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& k : key_table()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void apply_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                        std::string(line) + "'");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig cfg = default_config();
  apply_text(cfg, text);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_text(cfg, ss.str());
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) {
    if (!k.get) continue;
    out += k.name;
    out += '=';
    out += k.get(cfg);
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& k : key_table()) {
    if (!k.get || k.name.rfind("run.", 0) == 0) continue;
    const std::string line = k.name + "=" + k.get(cfg) + "\n";
    for (unsigned char ch : line) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

std::string run_directory(const RunConfig& cfg) {
  return (std::filesystem::path(cfg.output_dir) / cfg.run_id).string();
}

std::string seed_directory(const RunConfig& cfg, std::uint64_t seed) {
  return (std::filesystem::path(run_directory(cfg)) / ("seed_" + std::to_string(seed))).string();
}

}  // namespace poar

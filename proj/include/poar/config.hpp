#pragma once

// Run configuration: a flat `key=value` text format with dotted namespaces,
// layered as built-in defaults <- config file <- command-line overrides.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poar/env.hpp"
#include "poar/model.hpp"
#include "poar/ppo.hpp"
#include "poar/schedule.hpp"
#include "poar/srl.hpp"

namespace poar {

enum class TrainMode { poar, ppo_baseline, decoupled };

TrainMode parse_train_mode(std::string_view s);
std::string to_string(TrainMode m);

struct DecoupledConfig {
  int pretrain_samples = 20000;
  int pretrain_epochs = 30;
  int batch_size = 256;
  bool operator==(const DecoupledConfig&) const = default;
};

struct RunConfig {
  env::EnvId env_id = env::EnvId::mobile;
  env::ObservationKind observation = env::ObservationKind::pixels;
  env::WorkspaceConfig workspace;
  env::OmniRewardParams omni;

  TrainMode mode = TrainMode::ppo_baseline;
  ScheduleConfig schedule;  // schedule.total_steps is the training budget N
  ppo::PPOConfig ppo;
  DecoupledConfig decoupled;

  srl::SRLWeights weights;
  srl::StateSplit split;
  int srl_hidden = 64;
  std::vector<int> encoder_channels{8, 16, 16};
  int encoder_kernel = 4;
  int encoder_stride = 2;

  /// Directory of demonstration CSVs; when empty, `demo_count` expert
  /// trajectories are generated from `demo_seed`.
  std::string demo_path;
  int demo_count = 50;
  std::uint64_t demo_seed = 1000;

  int snapshot_interval = 0;  // episodes between state-graph snapshots; 0 disables
  int snapshot_steps = 2000;
  int snapshot_images = 4;  // reconstruction pairs per snapshot
  bool checkpoints = true;

  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  std::string run_id = "run";

  /// Checks every field against its module's invariants.
  void validate() const;
  ModelConfig model_config() const;
  bool operator==(const RunConfig&) const = default;
};

/// Built-in defaults; the output directory honors POAR_OUTPUT_ROOT.
RunConfig default_config();

/// Applies one `key=value` assignment. Unknown keys and unparsable values
/// throw ConfigError naming the key.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Applies every assignment in `text` (one per line, `#` comments allowed).
void apply_text(RunConfig& cfg, std::string_view text);

/// defaults <- file (if non-empty) <- overrides, then validate().
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig parse_config_text(std::string_view text);

/// Every key in canonical order; parse_config_text(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

/// FNV-1a hash of the emitted configuration excluding `run.*` keys (which do
/// not influence training).
std::uint64_t config_hash(const RunConfig& cfg);

std::vector<std::string> config_keys();

/// <output_dir>/<run_id>
std::string run_directory(const RunConfig& cfg);
/// <output_dir>/<run_id>/seed_<seed>
std::string seed_directory(const RunConfig& cfg, std::uint64_t seed);

}  // namespace poar

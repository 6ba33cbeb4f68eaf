#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "poar/ppo.hpp"
#include "poar/srl.hpp"

namespace poar {

struct ModelConfig {
  srl::EncoderSpec encoder;  // latent_dim must equal split.total() for image encoders
  srl::StateSplit split;
  int srl_hidden = 64;
  std::vector<int> policy_hidden{64, 64};
  /// Build the decoder and SRL heads (not needed for ground-truth coordinates).
  bool with_srl = true;
};

/// Encoder, policy/value heads and (optionally) SRL heads. Each component is
/// initialized from its own seed stream so that adding or removing SRL heads
/// leaves the encoder and policy initialization unchanged.
class PoarModel {
 public:
  PoarModel(const ModelConfig& cfg, std::uint64_t seed);

  srl::Encoder& encoder() { return *encoder_; }
  ppo::PolicyValueNet& policy() { return *policy_; }
  bool has_srl() const { return srl_ != nullptr; }
  srl::SrlModel& srl();
  const ModelConfig& config() const { return cfg_; }

  /// Every parameter in a fixed order (encoder, policy, value, SRL).
  nn::ParamList all_params() const;

 private:
  ModelConfig cfg_;
  std::unique_ptr<srl::Encoder> encoder_;
  std::unique_ptr<ppo::PolicyValueNet> policy_;
  std::unique_ptr<srl::SrlModel> srl_;
};

}  // namespace poar

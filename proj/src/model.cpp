#include "poar/model.hpp"

#include "poar/error.hpp"
#include "poar/rng.hpp"

namespace poar {

PoarModel::PoarModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (!cfg_.encoder.identity() && cfg_.encoder.latent_dim != cfg_.split.total()) {
    throw ConfigError("encoder output width (" + std::to_string(cfg_.encoder.latent_dim) +
                      ") must equal the state split total (" + std::to_string(cfg_.split.total()) + ")");
  }
  Rng enc_rng(derive_seed(seed, 0));
  Rng pol_rng(derive_seed(seed, 1));
  Rng srl_rng(derive_seed(seed, 2));
  encoder_ = std::make_unique<srl::Encoder>(cfg_.encoder, enc_rng);
  policy_ = std::make_unique<ppo::PolicyValueNet>(encoder_->latent_dim(), cfg_.policy_hidden, pol_rng);
  if (cfg_.with_srl && !cfg_.encoder.identity()) {
    srl_ = std::make_unique<srl::SrlModel>(cfg_.split, cfg_.encoder, cfg_.srl_hidden, srl_rng);
  }
}

srl::SrlModel& PoarModel::srl() {
  if (!srl_) throw ConfigError("model has no SRL heads");
  return *srl_;
}

nn::ParamList PoarModel::all_params() const {
  nn::ParamList out = encoder_->params();
  for (auto* p : policy_->params()) out.push_back(p);
  if (srl_) {
    for (auto* p : srl_->params()) out.push_back(p);
  }
  return out;
}

}  // namespace poar

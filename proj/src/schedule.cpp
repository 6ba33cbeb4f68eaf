#include "poar/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "poar/error.hpp"

namespace poar {

void ScheduleConfig::validate() const {
  if (!(lr1 > 0.0)) throw ConfigError("schedule.lr1: must be > 0");
  if (!(lr2 > 0.0)) throw ConfigError("schedule.lr2: must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("schedule.alpha: must be in (0,1]");
  if (!(beta > 0.0)) throw ConfigError("schedule.beta: must be > 0");
  if (total_steps < 1) throw ConfigError("train.total_steps: must be >= 1");
}

LearningRates lr_at_fraction(double r, const ScheduleConfig& cfg) {
  LearningRates out;
  out.lr1 = cfg.lr1 * r;
  const double decay = cfg.lr2_literal ? std::exp(-cfg.beta * r) : std::exp(-cfg.beta * (1.0 - r));
  double factor = std::max(decay, 0.001 * r);
  // Training has ended at r = 0; the decaying form is pinned to zero there
  // instead of the residual exp(-beta).
  if (!cfg.lr2_literal && r <= 0.0) factor = 0.0;
  out.lr2 = cfg.lr2 * factor;
  return out;
}

LearningRates lr_schedule(std::int64_t n, const ScheduleConfig& cfg) {
  if (n < 1 || n > cfg.total_steps) {
    throw UsageError("lr_schedule: step " + std::to_string(n) + " outside [1, " +
                     std::to_string(cfg.total_steps) + "]");
  }
  const double r = 1.0 - static_cast<double>(n - 1) / static_cast<double>(cfg.total_steps);
  return lr_at_fraction(r, cfg);
}

void ParamRegistry::add(nn::Param* p, ParamRole role) {
  for (const auto& [q, r] : entries_) {
    if (q == p) throw ConfigError("parameter '" + p->name + "' registered twice");
  }
  entries_.emplace_back(p, role);
}

void ParamRegistry::add(std::span<nn::Param* const> ps, ParamRole role) {
  for (auto* p : ps) add(p, role);
}

ParamRole ParamRegistry::role(const nn::Param* p) const {
  for (const auto& [q, r] : entries_) {
    if (q == p) return r;
  }
  throw UsageError("parameter '" + p->name + "' is not registered");
}

nn::ParamList ParamRegistry::rl_params() const {
  nn::ParamList out;
  for (const auto& [p, r] : entries_) {
    if (r != ParamRole::srl_only) out.push_back(p);
  }
  return out;
}

nn::ParamList ParamRegistry::srl_params() const {
  nn::ParamList out;
  for (const auto& [p, r] : entries_) {
    if (r != ParamRole::rl_only) out.push_back(p);
  }
  return out;
}

nn::ParamList ParamRegistry::shared_params() const {
  nn::ParamList out;
  for (const auto& [p, r] : entries_) {
    if (r == ParamRole::shared) out.push_back(p);
  }
  return out;
}

nn::ParamList ParamRegistry::all() const {
  nn::ParamList out;
  for (const auto& [p, r] : entries_) out.push_back(p);
  return out;
}

void scale_shared_gradients(const ParamRegistry& registry, double alpha) {
  for (auto* p : registry.shared_params()) p->grad *= alpha;
}

}  // namespace poar

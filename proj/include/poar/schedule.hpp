#pragma once

// Learning-rate schedules for the two optimizers and the shared-parameter
// gradient scaling applied to the RL optimizer.

#include <cstdint>
#include <span>
#include <vector>

#include "poar/nn.hpp"

namespace poar {

struct ScheduleConfig {
  double lr1 = 5e-4;  // RL optimizer initial rate
  double lr2 = 2e-4;  // SRL optimizer initial rate
  double alpha = 0.001;
  double beta = 20.0;
  std::int64_t total_steps = 1'000'000;
  /// Use lr2 = lr2_0 * max(exp(-beta r), 0.001 r) exactly as printed instead
  /// of the decaying form max(exp(-beta (1 - r)), 0.001 r).
  bool lr2_literal = false;

  void validate() const;
  bool operator==(const ScheduleConfig&) const = default;
};

struct LearningRates {
  double lr1 = 0.0;
  double lr2 = 0.0;
};

/// Rates at step n (1 <= n <= N), with r = 1 - (n - 1) / N.
LearningRates lr_schedule(std::int64_t n, const ScheduleConfig& cfg);
/// Same rates expressed directly in terms of the remaining fraction r in [0, 1].
LearningRates lr_at_fraction(double r, const ScheduleConfig& cfg);

enum class ParamRole { rl_only, srl_only, shared };

/// Tags every trainable parameter as RL-only, SRL-only or shared.
class ParamRegistry {
 public:
  void add(nn::Param* p, ParamRole role);
  void add(std::span<nn::Param* const> ps, ParamRole role);

  ParamRole role(const nn::Param* p) const;
  /// Parameters optimized by the RL optimizer (RL-only and shared).
  nn::ParamList rl_params() const;
  /// Parameters optimized by the SRL optimizer (SRL-only and shared).
  nn::ParamList srl_params() const;
  nn::ParamList shared_params() const;
  nn::ParamList all() const;

 private:
  std::vector<std::pair<nn::Param*, ParamRole>> entries_;
};

/// Multiplies the gradient of every shared parameter by `alpha`; RL-only and
/// SRL-only gradients are left untouched.
void scale_shared_gradients(const ParamRegistry& registry, double alpha);

}  // namespace poar

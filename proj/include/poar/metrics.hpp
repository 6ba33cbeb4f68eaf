#pragma once

// Learning curves, the policy-regret metric and seed aggregation.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace poar::metrics {

struct CurvePoint {
  std::int64_t global_step = 0;
  std::int64_t episode = 0;
  double reward = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

/// One row per completed episode.
struct LearningCurve {
  std::vector<CurvePoint> points;
  std::uint64_t seed = 0;
  std::string run_id;

  /// Steps strictly increasing, rewards finite.
  void validate() const;
  std::vector<double> rewards() const;
};

inline constexpr int kSmoothingWindow = 21;

/// Centered moving average, truncated at the ends (only in-range neighbours
/// are averaged).
std::vector<double> moving_average(const std::vector<double>& xs, int window = kSmoothingWindow);

/// Trapezoidal integral over global_step of (target - smoothed reward).
double policy_regret(const LearningCurve& curve, double target_reward, int window = kSmoothingWindow);

/// Mean reward over the last 10% of episodes (at least one).
double final_window_reward(const LearningCurve& curve);

struct RegretResult {
  std::string mode;
  std::vector<double> raw_regrets;  // one per seed
  double regret_mean = 0.0;
  double regret_std = 0.0;
  double normalized = 0.0;  // regret_mean / baseline regret_mean
  double reward_mean = 0.0;
  double reward_std = 0.0;
};

using ModeCurves = std::vector<std::pair<std::string, std::vector<LearningCurve>>>;

/// Per-mode regret statistics normalized by the baseline mode's mean regret.
/// Standard deviations are population deviations over seeds.
std::vector<RegretResult> normalize_and_tabulate(const ModeCurves& runs, const std::string& baseline_mode,
                                                 double target_reward);

/// `mode,regret_mean,regret_std,normalized,reward_mean,reward_std`
std::string format_metrics_csv(const std::vector<RegretResult>& rows);
void write_metrics_csv(const std::string& path, const std::vector<RegretResult>& rows);

/// Linear interpolation of the raw rewards at `step` (inside the curve's range).
double interpolate(const LearningCurve& curve, double step);

struct AggregateCurve {
  std::vector<double> steps;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Resamples every curve onto `grid_points` evenly spaced steps spanning the
/// overlap of their step ranges; returns the pointwise mean and population std.
AggregateCurve aggregate_seeds(const std::vector<LearningCurve>& curves, int grid_points = 200);

/// Header `global_step,episode,reward`.
void write_curve_csv(const std::string& path, const LearningCurve& curve);
LearningCurve read_curve_csv(const std::string& path);

}  // namespace poar::metrics

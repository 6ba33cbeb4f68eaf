#pragma once

// Pixel-observation robot environments: MobileRobot (reach a target) and
// Omnirobot (circle a target fixed at the origin). Both use four discrete
// axis-aligned moves and render flat-colored RGB images.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "poar/rng.hpp"

namespace poar::env {

using Vec2 = Eigen::Vector2d;

enum class EnvId { mobile, omni };

EnvId parse_env_id(std::string_view name);
std::string to_string(EnvId id);

/// Actions: 0 = +x, 1 = -x, 2 = +y, 3 = -y.
inline constexpr int kNumActions = 4;

Vec2 action_direction(int action);

struct WorkspaceConfig {
  double lo = -1.0;  // square bounds [lo, hi]^2
  double hi = 1.0;
  int image_size = 64;
  int episode_length = 250;
  double step_size = 0.05;
  double target_radius = 0.1;

  void validate() const;
  double extent() const { return hi - lo; }
  double units_per_pixel() const { return extent() / image_size; }
  bool contains(const Vec2& p) const;
  Vec2 clamp(const Vec2& p) const;
  /// Maps a workspace coordinate into [-1, 1]^2.
  Vec2 normalize(const Vec2& p) const;
  bool operator==(const WorkspaceConfig&) const = default;
};

struct OmniRewardParams {
  double lambda = 10.0;
  double radius = 0.5;
  int lag = 5;
  double bump_penalty = -1.0;

  void validate(const WorkspaceConfig& ws) const;
  bool operator==(const OmniRewardParams&) const = default;
};

struct EnvState {
  Vec2 agent_pos = Vec2::Zero();
  Vec2 target_pos = Vec2::Zero();
  int step_index = 0;
  /// Most recent agent positions, newest last; holds at most `lag` entries
  /// (Omnirobot only).
  std::deque<Vec2> history;
};

struct Observation {
  int size = 0;
  Eigen::VectorXd pixels;  // size * size * 3, HWC

  double at(int y, int x, int c) const {
    return pixels[(static_cast<Eigen::Index>(y) * size + x) * 3 + c];
  }
};

struct Palette {
  static constexpr double background[3] = {0.0, 0.0, 0.0};
  static constexpr double target[3] = {1.0, 0.85, 0.0};
  static constexpr double agent[3] = {0.1, 0.4, 1.0};
};

/// Radius used to draw the agent; at least one pixel so the agent is always
/// visible at small resolutions.
double agent_draw_radius(const WorkspaceConfig& ws);
/// Half side of the drawn target square.
double target_draw_half(const WorkspaceConfig& ws);

Observation render(const EnvState& state, const WorkspaceConfig& ws);

/// What the agent receives: the rendered image, or ground-truth
/// (agent_x, agent_y, target_x, target_y) coordinates.
enum class ObservationKind { pixels, coords };

ObservationKind parse_observation_kind(std::string_view s);
std::string to_string(ObservationKind k);
int observation_size(ObservationKind k, const WorkspaceConfig& ws);
Eigen::VectorXd observe(const EnvState& state, const WorkspaceConfig& ws, ObservationKind kind);

/// Circling reward:
///   lambda * (1 - lambda * (|z_t| - R)^2) * |z_t - z_lag|^2 + lambda^2 * bump_penalty * [bumped]
double omni_reward(const Vec2& z_t, const Vec2& z_lag, bool bumped, const OmniRewardParams& params);

/// Deterministic scripted expert. MobileRobot: the move that minimizes the
/// resulting distance to the target. Omnirobot: the move best aligned with a
/// counter-clockwise step along the circle of radius R.
int expert_policy(EnvId id, const EnvState& state, const WorkspaceConfig& ws,
                  const OmniRewardParams& omni);

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool bumped = false;
};

class RobotEnv {
 public:
  explicit RobotEnv(EnvId id, WorkspaceConfig ws = {}, OmniRewardParams omni = {});

  /// Reseeds the placement stream with `seed` and starts a new episode.
  Observation reset(std::uint64_t seed);
  /// Starts a new episode, continuing the current placement stream.
  Observation reset();
  StepResult step(int action);

  Observation render() const { return poar::env::render(state_, ws_); }
  /// Ground-truth (agent_x, agent_y, target_x, target_y).
  Eigen::Vector4d coordinates() const;

  EnvId id() const { return id_; }
  const EnvState& state() const { return state_; }
  void set_state(const EnvState& s) { state_ = s; }
  const WorkspaceConfig& workspace() const { return ws_; }
  const OmniRewardParams& omni_params() const { return omni_; }
  bool done() const { return done_; }
  void set_done(bool d) { done_ = d; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  void place();

  EnvId id_;
  WorkspaceConfig ws_;
  OmniRewardParams omni_;
  EnvState state_;
  Rng rng_;
  bool started_ = false;
  bool done_ = false;
};

struct DemoTrajectory {
  std::vector<Vec2> coords;
};

/// Runs the expert for full episodes from seeded resets and records the
/// agent position after every step.
std::vector<DemoTrajectory> generate_demos(EnvId id, int n_trajectories, std::uint64_t seed,
                                           const WorkspaceConfig& ws = {},
                                           const OmniRewardParams& omni = {});

/// Writes one `traj_NNNN.csv` (header `x,y`) per trajectory plus
/// `manifest.json` describing the generator.
void write_demos(const std::string& dir, const std::vector<DemoTrajectory>& demos, EnvId id,
                 std::uint64_t seed, const WorkspaceConfig& ws, const OmniRewardParams& omni);
std::vector<DemoTrajectory> read_demos(const std::string& dir);

/// Mean episode reward of the scripted expert over `episodes` seeded episodes.
double expert_mean_reward(EnvId id, int episodes, std::uint64_t seed, const WorkspaceConfig& ws,
                          const OmniRewardParams& omni);

}  // namespace poar::env

#include "poar/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poar/error.hpp"

namespace poar::env {

EnvId parse_env_id(std::string_view name) {
  if (name == "mobile" || name == "MobileRobot") return EnvId::mobile;
  if (name == "omni" || name == "Omnirobot") return EnvId::omni;
  throw ConfigError("unknown env_id '" + std::string(name) + "' (expected mobile|omni)");
}

std::string to_string(EnvId id) { return id == EnvId::mobile ? "mobile" : "omni"; }

Vec2 action_direction(int action) {
  switch (action) {
    case 0: return {1.0, 0.0};
    case 1: return {-1.0, 0.0};
    case 2: return {0.0, 1.0};
    case 3: return {0.0, -1.0};
    default: throw UsageError("action " + std::to_string(action) + " outside {0,1,2,3}");
  }
}

void WorkspaceConfig::validate() const {
  if (!(hi > lo)) throw ConfigError("env.bounds: upper bound must exceed lower bound");
  if (image_size < 16) throw ConfigError("env.image_size: must be >= 16");
  if (!(step_size > 0.0 && step_size < 1.0)) throw ConfigError("env.step_size: must be in (0,1)");
  if (!(target_radius > 0.0 && target_radius < 1.0)) {
    throw ConfigError("env.target_radius: must be in (0,1)");
  }
  if (episode_length < 1) throw ConfigError("env.episode_length: must be >= 1");
}

bool WorkspaceConfig::contains(const Vec2& p) const {
  return p.x() >= lo && p.x() <= hi && p.y() >= lo && p.y() <= hi;
}

Vec2 WorkspaceConfig::clamp(const Vec2& p) const {
  return {std::clamp(p.x(), lo, hi), std::clamp(p.y(), lo, hi)};
}

Vec2 WorkspaceConfig::normalize(const Vec2& p) const {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * extent();
  return (p.array() - mid).matrix() / half;
}

void OmniRewardParams::validate(const WorkspaceConfig& ws) const {
  if (!(lambda > 0.0)) throw ConfigError("omni.lambda: must be > 0");
  if (!(radius > 0.0) || radius > 0.5 * ws.extent()) {
    throw ConfigError("omni.radius: circle must lie within bounds");
  }
  if (lag < 1) throw ConfigError("omni.lag: must be >= 1");
  if (lag >= ws.episode_length) throw ConfigError("omni.lag: must be < env.episode_length");
  if (!std::isfinite(bump_penalty)) throw ConfigError("omni.bump_penalty: must be finite");
}

double agent_draw_radius(const WorkspaceConfig& ws) {
  return std::max(0.08 * ws.extent() / 2.0, ws.units_per_pixel());
}

double target_draw_half(const WorkspaceConfig& ws) {
  return std::max(ws.target_radius, ws.units_per_pixel());
}

Observation render(const EnvState& state, const WorkspaceConfig& ws) {
  Observation obs;
  obs.size = ws.image_size;
  const int n = ws.image_size;
  obs.pixels.resize(static_cast<Eigen::Index>(n) * n * 3);
  const double upp = ws.units_per_pixel();
  const double agent_r2 = std::pow(agent_draw_radius(ws), 2);
  const double half = target_draw_half(ws);
  for (int row = 0; row < n; ++row) {
    const double y = ws.hi - (row + 0.5) * upp;
    for (int col = 0; col < n; ++col) {
      const double x = ws.lo + (col + 0.5) * upp;
      const double* color = Palette::background;
      if (std::abs(x - state.target_pos.x()) <= half && std::abs(y - state.target_pos.y()) <= half) {
        color = Palette::target;
      }
      const double dx = x - state.agent_pos.x();
      const double dy = y - state.agent_pos.y();
      if (dx * dx + dy * dy <= agent_r2) color = Palette::agent;
      double* px = obs.pixels.data() + (static_cast<Eigen::Index>(row) * n + col) * 3;
      px[0] = color[0];
      px[1] = color[1];
      px[2] = color[2];
    }
  }
  return obs;
}

double omni_reward(const Vec2& z_t, const Vec2& z_lag, bool bumped, const OmniRewardParams& p) {
  const double ring = p.lambda * (1.0 - p.lambda * std::pow(z_t.norm() - p.radius, 2));
  const double r = ring * (z_t - z_lag).squaredNorm();
  return r + p.lambda * p.lambda * p.bump_penalty * (bumped ? 1.0 : 0.0);
}

int expert_policy(EnvId id, const EnvState& state, const WorkspaceConfig& ws,
                  const OmniRewardParams& omni) {
  if (id == EnvId::mobile) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumActions; ++a) {
      const Vec2 next = ws.clamp(state.agent_pos + ws.step_size * action_direction(a));
      const double d = (next - state.target_pos).norm();
      if (d < best_dist) {
        best_dist = d;
        best = a;
      }
    }
    return best;
  }
  const Vec2 z = state.agent_pos - state.target_pos;
  if (z.norm() < 1e-12) return 0;
  // Aim at the point of the circle slightly ahead (counter-clockwise) of the
  // agent's current angle; the aim direction mixes tangential motion with
  // radial correction toward the ring.
  const double theta = std::atan2(z.y(), z.x());
  const double ahead = 2.0 * ws.step_size / omni.radius;
  const Vec2 aim = omni.radius * Vec2(std::cos(theta + ahead), std::sin(theta + ahead));
  const Vec2 ideal = aim - z;
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    const double dot = action_direction(a).dot(ideal);
    if (dot > best_dot) {
      best_dot = dot;
      best = a;
    }
  }
  return best;
}

RobotEnv::RobotEnv(EnvId id, WorkspaceConfig ws, OmniRewardParams omni)
    : id_(id), ws_(ws), omni_(omni) {
  ws_.validate();
  if (id_ == EnvId::omni) {
    omni_.validate(ws_);
    if (!ws_.contains(Vec2::Zero())) throw ConfigError("omni: origin must lie within bounds");
  }
}

void RobotEnv::place() {
  auto uniform_point = [&] {
    const double x = ws_.lo + uniform01(rng_) * ws_.extent();
    const double y = ws_.lo + uniform01(rng_) * ws_.extent();
    return Vec2(x, y);
  };
  if (id_ == EnvId::mobile) {
    state_.target_pos = uniform_point();
    do {
      state_.agent_pos = uniform_point();
    } while ((state_.agent_pos - state_.target_pos).norm() <= 2.0 * ws_.target_radius);
  } else {
    state_.target_pos = Vec2::Zero();
    do {
      state_.agent_pos = uniform_point();
    } while (state_.agent_pos.norm() <= ws_.target_radius);
  }
  state_.step_index = 0;
  state_.history.clear();
  state_.history.push_back(state_.agent_pos);
  started_ = true;
  done_ = false;
}

Observation RobotEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  place();
  return render();
}

Observation RobotEnv::reset() {
  place();
  return render();
}

StepResult RobotEnv::step(int action) {
  if (!started_) throw UsageError("step called before reset");
  if (done_) throw UsageError("step called after episode end; call reset first");
  const Vec2 proposed = state_.agent_pos + ws_.step_size * action_direction(action);
  const Vec2 clamped = ws_.clamp(proposed);
  StepResult out;
  out.bumped = clamped != proposed;
  state_.agent_pos = clamped;
  ++state_.step_index;

  if (id_ == EnvId::mobile) {
    if ((state_.agent_pos - state_.target_pos).norm() <= ws_.target_radius) {
      out.reward = 1.0;
    } else if (out.bumped) {
      out.reward = -1.0;
    }
  } else {
    state_.history.push_back(state_.agent_pos);
    while (static_cast<int>(state_.history.size()) > omni_.lag + 1) state_.history.pop_front();
    const Vec2 z_t = state_.agent_pos - state_.target_pos;
    const Vec2 z_lag = state_.history.front() - state_.target_pos;
    out.reward = omni_reward(z_t, z_lag, out.bumped, omni_);
  }
  done_ = state_.step_index >= ws_.episode_length;
  out.done = done_;
  out.obs = render();
  return out;
}

Eigen::Vector4d RobotEnv::coordinates() const {
  return {state_.agent_pos.x(), state_.agent_pos.y(), state_.target_pos.x(),
          state_.target_pos.y()};
}

std::vector<DemoTrajectory> generate_demos(EnvId id, int n_trajectories, std::uint64_t seed,
                                           const WorkspaceConfig& ws,
                                           const OmniRewardParams& omni) {
  if (n_trajectories < 1) throw UsageError("generate_demos: n_trajectories must be >= 1");
  RobotEnv env(id, ws, omni);
  std::vector<DemoTrajectory> out;
  out.reserve(static_cast<std::size_t>(n_trajectories));
  for (int i = 0; i < n_trajectories; ++i) {
    env.reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
    DemoTrajectory traj;
    traj.coords.reserve(static_cast<std::size_t>(ws.episode_length));
    while (!env.done()) {
      env.step(expert_policy(id, env.state(), ws, omni));
      traj.coords.push_back(env.state().agent_pos);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

double expert_mean_reward(EnvId id, int episodes, std::uint64_t seed, const WorkspaceConfig& ws,
                          const OmniRewardParams& omni) {
  RobotEnv env(id, ws, omni);
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    env.reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
    while (!env.done()) total += env.step(expert_policy(id, env.state(), ws, omni)).reward;
  }
  return total / episodes;
}

}  // namespace poar::env

namespace poar::env {

ObservationKind parse_observation_kind(std::string_view s) {
  if (s == "pixels") return ObservationKind::pixels;
  if (s == "coords") return ObservationKind::coords;
  throw ConfigError("env.observation: unknown value '" + std::string(s) + "' (expected pixels|coords)");
}

std::string to_string(ObservationKind k) { return k == ObservationKind::pixels ? "pixels" : "coords"; }

int observation_size(ObservationKind k, const WorkspaceConfig& ws) {
  return k == ObservationKind::pixels ? ws.image_size * ws.image_size * 3 : 4;
}

Eigen::VectorXd observe(const EnvState& state, const WorkspaceConfig& ws, ObservationKind kind) {
  if (kind == ObservationKind::pixels) return render(state, ws).pixels;
  Eigen::VectorXd v(4);
  v << state.agent_pos.x(), state.agent_pos.y(), state.target_pos.x(), state.target_pos.y();
  return v;
}

}  // namespace poar::env

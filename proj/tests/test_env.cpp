#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "poar/env.hpp"
#include "poar/error.hpp"

using namespace poar;
using namespace poar::env;

namespace {

EnvState state_at(Vec2 agent, Vec2 target) {
  EnvState s;
  s.agent_pos = agent;
  s.target_pos = target;
  return s;
}

}  // namespace

TEST(Env, ResetIsDeterministic) {
  RobotEnv a(EnvId::mobile);
  RobotEnv b(EnvId::mobile);
  EXPECT_EQ(a.reset(7).pixels, b.reset(7).pixels);
  RobotEnv c(EnvId::mobile);
  c.reset(1);
  RobotEnv d(EnvId::mobile);
  d.reset(2);
  EXPECT_NE(c.state().agent_pos, d.state().agent_pos);
}

TEST(Env, UnknownIdIsConfigError) { EXPECT_THROW(parse_env_id("jaka"), ConfigError); }

TEST(Env, ObservationShapeAndRange) {
  RobotEnv env(EnvId::mobile);
  const Observation o = env.reset(3);
  ASSERT_EQ(o.pixels.size(), 64 * 64 * 3);
  EXPECT_GE(o.pixels.minCoeff(), 0.0);
  EXPECT_LE(o.pixels.maxCoeff(), 1.0);
}

TEST(Env, OmniTargetRenderedAtCenter) {
  RobotEnv env(EnvId::omni);
  const Observation o = env.reset(11);
  EXPECT_EQ(env.state().target_pos, Vec2::Zero());
  const int c = o.size / 2;
  const bool agent_here = (env.state().agent_pos).norm() < 0.15;
  if (!agent_here) {
    for (int ch = 0; ch < 3; ++ch) EXPECT_DOUBLE_EQ(o.at(c, c, ch), Palette::target[ch]);
  }
  EXPECT_GT(env.state().agent_pos.norm(), WorkspaceConfig{}.target_radius);
}

TEST(Env, MobileRewards) {
  WorkspaceConfig ws;
  RobotEnv env(EnvId::mobile, ws);
  env.reset(1);
  // Free-space move.
  env.set_state(state_at({0.0, 0.0}, {0.8, 0.8}));
  EXPECT_EQ(env.step(0).reward, 0.0);
  // Reaching the target.
  env.set_state(state_at({0.5, 0.5}, {0.6, 0.5}));
  EXPECT_EQ(env.step(0).reward, 1.0);
  // Clamped at the boundary.
  env.set_state(state_at({0.98, 0.0}, {-0.8, -0.8}));
  const StepResult r = env.step(0);
  EXPECT_EQ(r.reward, -1.0);
  EXPECT_TRUE(r.bumped);
  EXPECT_DOUBLE_EQ(env.state().agent_pos.x(), 1.0);
}

TEST(Env, DoneAtEpisodeLengthAndStepAfterDoneFails) {
  WorkspaceConfig ws;
  ws.episode_length = 5;
  RobotEnv env(EnvId::mobile, ws);
  env.reset(4);
  for (int t = 0; t < 4; ++t) EXPECT_FALSE(env.step(t % 4).done);
  EXPECT_TRUE(env.step(0).done);
  EXPECT_THROW(env.step(0), UsageError);
}

TEST(Env, ClampingHoldsForRandomActions) {
  RobotEnv env(EnvId::omni);
  env.reset(5);
  Rng rng(9);
  for (int t = 0; t < 250; ++t) {
    env.step(static_cast<int>(rng() % 4));
    EXPECT_TRUE(env.workspace().contains(env.state().agent_pos));
  }
}

TEST(Env, DeterministicTrajectories) {
  RobotEnv a(EnvId::omni);
  RobotEnv b(EnvId::omni);
  a.reset(21);
  b.reset(21);
  for (int t = 0; t < 60; ++t) {
    const StepResult ra = a.step(t % 4 == 3 ? 0 : t % 4);
    const StepResult rb = b.step(t % 4 == 3 ? 0 : t % 4);
    EXPECT_EQ(ra.reward, rb.reward);
    EXPECT_EQ(ra.obs.pixels, rb.obs.pixels);
  }
}

TEST(OmniReward, Examples) {
  const OmniRewardParams p;
  EXPECT_EQ(omni_reward({0.3, 0.1}, {0.3, 0.1}, false, p), 0.0);
  const double d = 0.07;
  EXPECT_NEAR(omni_reward({p.radius, 0.0}, {p.radius + d, 0.0}, false, p), p.lambda * d * d, 1e-15);
  // Direct evaluation: ring factor 1 - 10 * 0^2 = 1, displacement 0.01.
  const double expected = 10.0 * (1.0 - 10.0 * std::pow(0.5 - 0.5, 2)) * 0.01 + 100.0 * -1.0;
  EXPECT_NEAR(omni_reward({0.5, 0.0}, {0.4, 0.0}, true, p), expected, 1e-12);
}

TEST(OmniReward, ExpertDominatesStationary) {
  const WorkspaceConfig ws;
  const OmniRewardParams p;
  const double expert = expert_mean_reward(EnvId::omni, 5, 3, ws, p);
  // A policy that oscillates in place earns at most tiny displacement rewards.
  RobotEnv env(EnvId::omni, ws, p);
  env.reset(3);
  double still = 0.0;
  for (int t = 0; t < ws.episode_length; ++t) still += env.step(t % 2).reward;
  EXPECT_GT(expert, 10.0 * std::abs(still));
}

TEST(Expert, MobileGreedyAndStationary) {
  const WorkspaceConfig ws;
  const OmniRewardParams p;
  EXPECT_EQ(expert_policy(EnvId::mobile, state_at({-0.5, 0.2}, {0.5, 0.2}), ws, p), 0);
  RobotEnv env(EnvId::mobile, ws);
  env.reset(2);
  env.set_state(state_at({0.3, 0.3}, {0.3, 0.3}));
  for (int t = 0; t < 40; ++t) {
    env.step(expert_policy(EnvId::mobile, env.state(), ws, p));
    EXPECT_LE((env.state().agent_pos - env.state().target_pos).norm(), ws.target_radius);
  }
}

TEST(Expert, OmniConvergesToRadius) {
  const WorkspaceConfig ws;
  const OmniRewardParams p;
  RobotEnv env(EnvId::omni, ws, p);
  env.reset(8);
  env.set_state(state_at({0.95, -0.95}, {0.0, 0.0}));
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < ws.episode_length; ++t) {
    env.step(expert_policy(EnvId::omni, env.state(), ws, p));
    if (t >= ws.episode_length / 2) {
      sum += env.state().agent_pos.norm();
      ++n;
    }
  }
  EXPECT_LT(std::abs(sum / n - p.radius), ws.step_size);
}

TEST(Demos, DeterministicAndReachTarget) {
  const WorkspaceConfig ws;
  const auto a = generate_demos(EnvId::mobile, 3, 42, ws);
  const auto b = generate_demos(EnvId::mobile, 3, 42, ws);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].coords.size(), static_cast<std::size_t>(ws.episode_length));
    for (std::size_t k = 0; k < a[i].coords.size(); ++k) EXPECT_EQ(a[i].coords[k], b[i].coords[k]);
  }
  // Replay the seeded resets to recover each target.
  RobotEnv env(EnvId::mobile, ws);
  for (std::size_t i = 0; i < a.size(); ++i) {
    env.reset(derive_seed(42, i));
    for (const auto& c : a[i].coords) EXPECT_TRUE(ws.contains(c));
    EXPECT_LE((a[i].coords.back() - env.state().target_pos).norm(), ws.target_radius);
  }
}

TEST(Demos, RoundTripThroughCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "poar_test_demos";
  std::filesystem::remove_all(dir);
  const WorkspaceConfig ws;
  const auto demos = generate_demos(EnvId::omni, 2, 5, ws);
  write_demos(dir.string(), demos, EnvId::omni, 5, ws, {});
  const auto back = read_demos(dir.string());
  ASSERT_EQ(back.size(), demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    ASSERT_EQ(back[i].coords.size(), demos[i].coords.size());
    for (std::size_t k = 0; k < demos[i].coords.size(); ++k) EXPECT_EQ(back[i].coords[k], demos[i].coords[k]);
  }
  EXPECT_THROW(read_demos((dir / "missing").string()), IoError);
}

TEST(Render, InjectiveAtTwoPixels) {
  const WorkspaceConfig ws;
  const double d = 2.0 * ws.units_per_pixel();
  const Observation a = render(state_at({0.1, 0.1}, {-0.6, -0.6}), ws);
  const Observation b = render(state_at({0.1 + d, 0.1}, {-0.6, -0.6}), ws);
  const Observation c = render(state_at({0.1, 0.1 + d}, {-0.6, -0.6}), ws);
  EXPECT_NE(a.pixels, b.pixels);
  EXPECT_NE(a.pixels, c.pixels);
}

TEST(Workspace, Validation) {
  WorkspaceConfig ws;
  ws.image_size = 8;
  EXPECT_THROW(ws.validate(), ConfigError);
  ws = {};
  ws.step_size = 1.5;
  EXPECT_THROW(ws.validate(), ConfigError);
}

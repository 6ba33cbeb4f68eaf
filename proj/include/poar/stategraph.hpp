#pragma once

// State-graph exports: snapshots of encoded states visited by the current
// policy, their PCA projections colored by reward, and autoencoder
// reconstruction dumps.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poar/env.hpp"
#include "poar/image.hpp"
#include "poar/model.hpp"

namespace poar::stategraph {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct StateSnapshot {
  std::int64_t episode = 0;
  Mat states;  // M x D, one visited state per row
  Vec rewards;  // M
  Mat coords;  // M x 2 ground-truth agent positions
};

struct RolloutSource {
  env::EnvId env_id = env::EnvId::mobile;
  env::WorkspaceConfig workspace;
  env::OmniRewardParams omni;
  env::ObservationKind observation = env::ObservationKind::pixels;
};

/// Rolls out the model's current (stochastic) policy for `n_steps` in a fresh
/// environment seeded from `rng`; after every step the new observation is
/// encoded and stored with the step's reward and the agent position. When
/// `observations` is given, `keep_observations` evenly spaced observations
/// are stored in it (one per column).
StateSnapshot collect_snapshot(PoarModel& model, const RolloutSource& src, int n_steps, Rng& rng,
                               std::int64_t episode, int keep_observations = 0, Mat* observations = nullptr);

struct ProjectionResult {
  Mat projected;  // M x p
  Vec explained_variance_ratio;  // p
  Mat axes;  // p x D, unit rows
  Vec mean;  // D
};

/// Mean-centered PCA onto the top `p` axes (p in {2, 3}); each axis is signed
/// so that its largest-magnitude coefficient is positive.
ProjectionResult pca_project(const Mat& states, int p);
inline ProjectionResult pca_project(const StateSnapshot& s, int p) { return pca_project(s.states, p); }

/// Scatter plot of the first two projected coordinates. Discrete coloring
/// maps rewards {-1, 0, +1} to red, gray and green; continuous coloring
/// interpolates blue to yellow over the reward range.
Image render_scatter(const Mat& projected, const Vec& rewards, bool discrete, int size = 256);

/// MMD^2 between the domain slice of (up to `max_points` evenly strided)
/// snapshot states and an equally sized uniform sample of `demo_coords`
/// (2 x N, normalized).
double domain_mmd(const StateSnapshot& snap, const srl::StateSplit& split, const Mat& demo_coords,
                  Rng& rng, int max_points = 1000);

struct SnapshotMeta {
  std::string env;
  std::string weights;
  srl::StateSplit split;
  std::optional<double> mmd_domain;
};

/// Writes `snapshot_ep<NNNNNN>.csv` (header reward,x,y,s0..) with a JSON
/// sidecar; returns the CSV path.
std::string write_snapshot(const std::string& dir, const StateSnapshot& snap, const SnapshotMeta& meta,
                           const ProjectionResult* projection = nullptr);
StateSnapshot read_snapshot(const std::string& csv_path);

/// Writes `projection_ep<NNNNNN>.csv` (pc1..pcp,reward) and the scatter
/// image `projection_ep<NNNNNN>.ppm`.
void write_projection(const std::string& dir, std::int64_t episode, const ProjectionResult& proj,
                      const Vec& rewards, bool discrete_rewards);

/// Encodes and decodes each observation column and writes
/// `<prefix>_<k>.ppm` side-by-side original/reconstruction pairs, with the
/// reconstruction clamped to [0, 1]. Returns the written paths.
std::vector<std::string> export_reconstructions(srl::Encoder& encoder, srl::SrlModel* srl, const Mat& observations,
                                                int image_size, const std::string& dir, const std::string& prefix);

/// Mean absolute per-value reconstruction error over the given observations.
double reconstruction_error(srl::Encoder& encoder, srl::SrlModel& srl, const Mat& observations);

std::string episode_tag(std::int64_t episode);

}  // namespace poar::stategraph

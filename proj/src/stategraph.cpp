#include "poar/stategraph.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "poar/error.hpp"
#include "poar/mmd.hpp"

namespace poar::stategraph {

namespace fs = std::filesystem;

std::string episode_tag(std::int64_t episode) { return fmt::format("ep{:06d}", episode); }

StateSnapshot collect_snapshot(PoarModel& model, const RolloutSource& src, int n_steps, Rng& rng,
                               std::int64_t episode, int keep_observations, Mat* observations) {
  if (n_steps < 1) throw UsageError("collect_snapshot: n_steps must be >= 1");
  env::RobotEnv env(src.env_id, src.workspace, src.omni);
  env.reset(rng());
  const int d = model.encoder().latent_dim();
  StateSnapshot snap;
  snap.episode = episode;
  snap.states.resize(n_steps, d);
  snap.rewards.resize(n_steps);
  snap.coords.resize(n_steps, 2);
  const int obs_size = env::observation_size(src.observation, src.workspace);
  const int keep = observations != nullptr ? std::clamp(keep_observations, 0, n_steps) : 0;
  const int stride = keep > 0 ? n_steps / keep : 1;
  if (observations != nullptr) observations->resize(obs_size, keep);

  Mat obs = env::observe(env.state(), src.workspace, src.observation);
  Mat state = model.encoder().forward(obs);
  for (int i = 0; i < n_steps; ++i) {
    const auto act = model.policy().act(state, rng).front();
    const env::StepResult r = env.step(act.action);
    obs = env::observe(env.state(), src.workspace, src.observation);
    state = model.encoder().forward(obs);
    snap.states.row(i) = state.col(0).transpose();
    snap.rewards[i] = r.reward;
    snap.coords.row(i) = env.state().agent_pos.transpose();
    if (keep > 0 && i % stride == 0 && i / stride < keep) observations->col(i / stride) = obs.col(0);
    if (r.done) {
      env.reset();
      obs = env::observe(env.state(), src.workspace, src.observation);
      state = model.encoder().forward(obs);
    }
  }
  return snap;
}

ProjectionResult pca_project(const Mat& states, int p) {
  if (p != 2 && p != 3) throw UsageError("pca_project: p must be 2 or 3");
  const Eigen::Index m = states.rows();
  const Eigen::Index d = states.cols();
  if (m < p) throw UsageError("pca_project: need at least p samples");
  if (d < p) throw UsageError("pca_project: state dimension smaller than p");
  if (m < d) spdlog::warn("pca_project: {} samples for {} dimensions; axes may be unstable", m, d);
  ProjectionResult out;
  out.mean = states.colwise().mean().transpose();
  const Mat centered = states.rowwise() - out.mean.transpose();
  const double scale = std::max(1.0, states.cwiseAbs().maxCoeff());
  if (centered.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw DegenerateInputError("pca_project: all states identical");
  }
  Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  const double total = sv.squaredNorm();
  out.axes.resize(p, d);
  out.explained_variance_ratio.resize(p);
  for (int k = 0; k < p; ++k) {
    Vec axis = k < sv.size() ? Vec(svd.matrixV().col(k)) : Vec::Zero(d);
    Eigen::Index idx = 0;
    axis.cwiseAbs().maxCoeff(&idx);
    if (axis[idx] < 0) axis = -axis;
    out.axes.row(k) = axis.transpose();
    const double s = k < sv.size() ? sv[k] : 0.0;
    out.explained_variance_ratio[k] = s * s / total;
  }
  out.projected = centered * out.axes.transpose();
  return out;
}

Image render_scatter(const Mat& projected, const Vec& rewards, bool discrete, int size) {
  if (projected.cols() < 2 || projected.rows() != rewards.size()) {
    throw UsageError("render_scatter: expects M x >=2 projections with M rewards");
  }
  Image img(size, size, 1.0);
  if (projected.rows() == 0) return img;
  const double margin = 0.05 * size;
  const Eigen::Vector2d lo = projected.leftCols(2).colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = projected.leftCols(2).colwise().maxCoeff().transpose();
  const Eigen::Vector2d span = (hi - lo).cwiseMax(1e-12);
  const double rmin = rewards.minCoeff();
  const double rmax = rewards.maxCoeff();
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    double color[3];
    if (discrete) {
      if (rewards[i] > 0.5) {
        color[0] = 0.1; color[1] = 0.7; color[2] = 0.1;
      } else if (rewards[i] < -0.5) {
        color[0] = 0.85; color[1] = 0.1; color[2] = 0.1;
      } else {
        color[0] = 0.55; color[1] = 0.55; color[2] = 0.55;
      }
    } else {
      const double t = rmax > rmin ? (rewards[i] - rmin) / (rmax - rmin) : 0.5;
      color[0] = 0.1 + 0.85 * t;
      color[1] = 0.2 + 0.65 * t;
      color[2] = 0.8 - 0.7 * t;
    }
    const double fx = (projected(i, 0) - lo.x()) / span.x();
    const double fy = (projected(i, 1) - lo.y()) / span.y();
    const int cx = static_cast<int>(std::lround(margin + fx * (size - 1 - 2 * margin)));
    const int cy = static_cast<int>(std::lround(size - 1 - margin - fy * (size - 1 - 2 * margin)));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = cx + dx;
        const int y = cy + dy;
        if (x < 0 || y < 0 || x >= size || y >= size) continue;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
      }
    }
  }
  return img;
}

double domain_mmd(const StateSnapshot& snap, const srl::StateSplit& split, const Mat& demo_coords, Rng& rng,
                  int max_points) {
  const srl::Slice ds = split.domain_slice();
  if (ds.length != demo_coords.rows()) throw ConfigError("domain_mmd: domain slice and demo dimensions differ");
  if (demo_coords.cols() == 0 || snap.states.rows() == 0) throw UsageError("domain_mmd: empty input");
  const Eigen::Index m = std::min<Eigen::Index>(max_points, snap.states.rows());
  const double stride = static_cast<double>(snap.states.rows()) / static_cast<double>(m);
  Mat x(ds.length, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto row = static_cast<Eigen::Index>(std::floor(j * stride));
    x.col(j) = snap.states.row(row).segment(ds.offset, ds.length).transpose();
  }
  Mat y(ds.length, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto col = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(demo_coords.cols()));
    y.col(j) = demo_coords.col(std::min(col, demo_coords.cols() - 1));
  }
  return srl::mmd_loss(x, y).value;
}

std::string write_snapshot(const std::string& dir, const StateSnapshot& snap, const SnapshotMeta& meta,
                           const ProjectionResult* projection) {
  fs::create_directories(dir);
  const std::string base = (fs::path(dir) / ("snapshot_" + episode_tag(snap.episode))).string();
  {
    std::ofstream out(base + ".csv");
    if (!out) throw IoError("cannot write snapshot '" + base + ".csv'");
    out << "reward,x,y";
    for (Eigen::Index k = 0; k < snap.states.cols(); ++k) out << ",s" << k;
    out << '\n';
    for (Eigen::Index i = 0; i < snap.states.rows(); ++i) {
      out << fmt::format("{},{},{}", snap.rewards[i], snap.coords(i, 0), snap.coords(i, 1));
      for (Eigen::Index k = 0; k < snap.states.cols(); ++k) out << ',' << fmt::format("{}", snap.states(i, k));
      out << '\n';
    }
    if (!out) throw IoError("failed writing snapshot '" + base + ".csv'");
  }
  nlohmann::json j;
  j["episode"] = snap.episode;
  j["samples"] = snap.states.rows();
  j["D"] = snap.states.cols();
  j["env"] = meta.env;
  j["weights"] = meta.weights;
  j["split"] = {{"dim_reward", meta.split.dim_reward},
                {"dim_inverse", meta.split.dim_inverse},
                {"dim_forward", meta.split.dim_forward},
                {"dim_domain", meta.split.dim_domain},
                {"mode", srl::to_string(meta.split.mode)}};
  if (meta.mmd_domain) j["mmd_domain"] = *meta.mmd_domain;
  if (projection != nullptr) {
    j["explained_variance_ratio"] =
        std::vector<double>(projection->explained_variance_ratio.data(),
                            projection->explained_variance_ratio.data() + projection->explained_variance_ratio.size());
  }
  std::ofstream side(base + ".json");
  if (!side) throw IoError("cannot write snapshot sidecar '" + base + ".json'");
  side << j.dump(2) << '\n';
  return base + ".csv";
}

StateSnapshot read_snapshot(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot read snapshot '" + csv_path + "'");
  std::string line;
  std::getline(in, line);
  const auto cols = std::count(line.begin(), line.end(), ',') + 1;
  if (line.rfind("reward,x,y", 0) != 0 || cols < 4) throw IoError("'" + csv_path + "': unexpected header");
  const Eigen::Index d = cols - 3;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(vals.size()) != cols) throw IoError("'" + csv_path + "': ragged row");
    rows.push_back(std::move(vals));
  }
  StateSnapshot snap;
  const auto m = static_cast<Eigen::Index>(rows.size());
  snap.states.resize(m, d);
  snap.rewards.resize(m);
  snap.coords.resize(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    snap.rewards[i] = r[0];
    snap.coords(i, 0) = r[1];
    snap.coords(i, 1) = r[2];
    for (Eigen::Index k = 0; k < d; ++k) snap.states(i, k) = r[static_cast<std::size_t>(k + 3)];
  }
  const auto sidecar = fs::path(csv_path).replace_extension(".json");
  if (fs::exists(sidecar)) {
    std::ifstream js(sidecar);
    snap.episode = nlohmann::json::parse(js).value("episode", std::int64_t{0});
  }
  return snap;
}

void write_projection(const std::string& dir, std::int64_t episode, const ProjectionResult& proj, const Vec& rewards,
                      bool discrete_rewards) {
  fs::create_directories(dir);
  const std::string base = (fs::path(dir) / ("projection_" + episode_tag(episode))).string();
  std::ofstream out(base + ".csv");
  if (!out) throw IoError("cannot write projection '" + base + ".csv'");
  for (Eigen::Index k = 0; k < proj.projected.cols(); ++k) out << "pc" << (k + 1) << ',';
  out << "reward\n";
  for (Eigen::Index i = 0; i < proj.projected.rows(); ++i) {
    for (Eigen::Index k = 0; k < proj.projected.cols(); ++k) out << fmt::format("{},", proj.projected(i, k));
    out << fmt::format("{}\n", rewards[i]);
  }
  if (!out) throw IoError("failed writing projection '" + base + ".csv'");
  write_ppm(base + ".ppm", render_scatter(proj.projected, rewards, discrete_rewards));
}

std::vector<std::string> export_reconstructions(srl::Encoder& encoder, srl::SrlModel* srl, const Mat& observations,
                                                int image_size, const std::string& dir, const std::string& prefix) {
  if (srl == nullptr || encoder.spec().identity()) {
    throw ConfigError("export_reconstructions: model has no decoder (train with srl.w_ae > 0)");
  }
  fs::create_directories(dir);
  const Mat recon = srl->decoder().forward(encoder.forward(observations)).cwiseMax(0.0).cwiseMin(1.0);
  std::vector<std::string> paths;
  for (Eigen::Index k = 0; k < observations.cols(); ++k) {
    const Image pair = side_by_side(image_from_hwc(observations.col(k), image_size),
                                    image_from_hwc(recon.col(k), image_size));
    const std::string path = (fs::path(dir) / fmt::format("{}_{}.ppm", prefix, k)).string();
    write_ppm(path, pair);
    paths.push_back(path);
  }
  return paths;
}

double reconstruction_error(srl::Encoder& encoder, srl::SrlModel& srl, const Mat& observations) {
  const Mat recon = srl.decoder().forward(encoder.forward(observations)).cwiseMax(0.0).cwiseMin(1.0);
  return (recon - observations).cwiseAbs().mean();
}

}  // namespace poar::stategraph

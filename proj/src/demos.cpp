#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "poar/env.hpp"
#include "poar/error.hpp"

namespace poar::env {

namespace fs = std::filesystem;

void write_demos(const std::string& dir, const std::vector<DemoTrajectory>& demos, EnvId id,
                 std::uint64_t seed, const WorkspaceConfig& ws, const OmniRewardParams& omni) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create demo directory " + dir + ": " + ec.message());

  nlohmann::json manifest;
  manifest["env"] = to_string(id);
  manifest["seed"] = seed;
  manifest["n_trajectories"] = demos.size();
  manifest["workspace"] = {{"lo", ws.lo},
                           {"hi", ws.hi},
                           {"image_size", ws.image_size},
                           {"episode_length", ws.episode_length},
                           {"step_size", ws.step_size},
                           {"target_radius", ws.target_radius}};
  manifest["omni"] = {{"lambda", omni.lambda},
                      {"radius", omni.radius},
                      {"lag", omni.lag},
                      {"bump_penalty", omni.bump_penalty}};
  auto& files = manifest["files"] = nlohmann::json::array();

  for (std::size_t i = 0; i < demos.size(); ++i) {
    std::ostringstream name;
    name << "traj_" << std::setw(4) << std::setfill('0') << i << ".csv";
    const fs::path path = fs::path(dir) / name.str();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x,y\n" << std::setprecision(17);
    for (const auto& c : demos[i].coords) out << c.x() << ',' << c.y() << '\n';
    files.push_back(name.str());
  }
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

std::vector<DemoTrajectory> read_demos(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read demo manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed demo manifest " + manifest_path.string() + ": " + e.what());
  }
  std::vector<DemoTrajectory> out;
  for (const auto& f : manifest.at("files")) {
    const fs::path path = fs::path(dir) / f.get<std::string>();
    std::ifstream csv(path);
    if (!csv) throw IoError("cannot read demo file " + path.string());
    std::string line;
    std::getline(csv, line);
    if (line != "x,y") throw IoError(path.string() + ": expected header 'x,y'");
    DemoTrajectory traj;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw IoError(path.string() + ": malformed row '" + line + "'");
      try {
        traj.coords.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": malformed row '" + line + "'");
      }
    }
    if (traj.coords.size() < 2) throw IoError(path.string() + ": trajectory shorter than 2 steps");
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace poar::env

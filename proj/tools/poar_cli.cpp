// poar: command-line entry point.
//
//   poar train  [--config FILE] [--set key=value ...] [--srl a10r5f1d2] ...
//   poar eval   RUN_DIR... [--baseline ppo_baseline] [--target R] [--out FILE]
//   poar demos  --out DIR [--env mobile] [--n 50] [--seed 1000]
//   poar export-states CHECKPOINT [--p 2] [--steps 2000] [--out DIR]
//
// Errors print a single line `error: <kind>: <message>` to stderr and exit 2.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "poar/config.hpp"
#include "poar/env.hpp"
#include "poar/error.hpp"
#include "poar/metrics.hpp"
#include "poar/stategraph.hpp"
#include "poar/trainer.hpp"

namespace fs = std::filesystem;
using namespace poar;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

void split_assignment(const std::string& s, Overrides& out) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + s + "' is not of the form key=value");
  out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string srl;
  std::string mode;
  std::string env;
  std::string seeds;
  std::int64_t steps = 0;
  std::string id;
  std::string out;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_path, "Flat key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "Override one key (key=value); repeatable")->allow_extra_args(false);
    app->add_option("--srl", srl, "SRL weight shorthand, e.g. a10r5f1d2");
    app->add_option("--mode", mode, "poar | ppo_baseline | decoupled");
    app->add_option("--env", env, "mobile | omni");
    app->add_option("--seeds", seeds, "Comma-separated seeds");
    app->add_option("--steps", steps, "Total environment steps");
    app->add_option("--id", id, "Run id (directory name under the output root)");
    app->add_option("-o,--output-dir", out, "Output root");
  }

  RunConfig resolve() const {
    Overrides o;
    for (const auto& s : sets) split_assignment(s, o);
    if (!srl.empty()) o.emplace_back("srl.weights", srl);
    if (!mode.empty()) o.emplace_back("train.mode", mode);
    if (!env.empty()) o.emplace_back("env.id", env);
    if (!seeds.empty()) o.emplace_back("run.seeds", seeds);
    if (steps > 0) o.emplace_back("train.total_steps", std::to_string(steps));
    if (!id.empty()) o.emplace_back("run.id", id);
    if (!out.empty()) o.emplace_back("run.output_dir", out);
    return load_config(config_path, o);
  }
};

// ---------------------------------------------------------------- train

int cmd_train(const ConfigArgs& args, const TrainOptions& opts, bool dry_run) {
  const RunConfig cfg = args.resolve();
  if (dry_run) {
    std::cout << emit_config(cfg);
    return 0;
  }
  spdlog::info("run {} mode {} weights {} seeds {}", run_directory(cfg), to_string(cfg.mode),
               cfg.weights.shorthand(), fmt::join(cfg.seeds, ","));
  train_all(cfg, opts);
  std::cout << run_directory(cfg) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct LoadedRun {
  RunConfig cfg;
  std::vector<metrics::LearningCurve> curves;
};

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("run directory '" + dir.string() + "' does not exist");
  LoadedRun run;
  run.cfg = parse_config_text(read_file(dir / "config.txt"));
  for (std::uint64_t seed : run.cfg.seeds) {
    const fs::path p = dir / fmt::format("seed_{}", seed) / "curve.csv";
    if (!fs::exists(p)) throw IoError("missing learning curve '" + p.string() + "'");
    metrics::LearningCurve c = metrics::read_curve_csv(p.string());
    c.seed = seed;
    c.run_id = run.cfg.run_id;
    run.curves.push_back(std::move(c));
  }
  return run;
}

int cmd_eval(const std::vector<std::string>& dirs, std::string baseline, std::optional<double> target,
             std::string out) {
  metrics::ModeCurves table;
  std::vector<LoadedRun> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  for (const auto& run : runs) {
    std::string label = to_string(run.cfg.mode);
    for (const auto& [existing, _] : table) {
      if (existing == label) label = run.cfg.run_id;
    }
    table.emplace_back(label, run.curves);
  }
  const RunConfig& first = runs.front().cfg;
  if (!target) {
    target = env::expert_mean_reward(first.env_id, 20, 12345, first.workspace, first.omni);
    spdlog::info("target reward (expert mean over 20 episodes): {:.3f}", *target);
  }
  const auto rows = metrics::normalize_and_tabulate(table, baseline, *target);
  if (out.empty()) out = (fs::path(dirs.front()) / "metrics.csv").string();
  metrics::write_metrics_csv(out, rows);

  for (const auto& run : runs) {
    if (run.curves.size() < 2) continue;
    const metrics::AggregateCurve agg = metrics::aggregate_seeds(run.curves);
    std::ofstream f(fs::path(run_directory(run.cfg)) / "curve_mean.csv");
    f << "global_step,mean,std\n";
    for (std::size_t i = 0; i < agg.steps.size(); ++i) f << fmt::format("{},{},{}\n", agg.steps[i], agg.mean[i], agg.std[i]);
  }

  fmt::print("{:<16} {:>14} {:>12} {:>11} {:>12} {:>11}\n", "mode", "regret", "+-", "normalized", "reward", "+-");
  for (const auto& r : rows) {
    fmt::print("{:<16} {:>14.1f} {:>12.1f} {:>11.3f} {:>12.2f} {:>11.2f}\n", r.mode, r.regret_mean, r.regret_std,
               r.normalized, r.reward_mean, r.reward_std);
  }
  fmt::print("wrote {}\n", out);
  return 0;
}

// ---------------------------------------------------------------- demos

int cmd_demos(const ConfigArgs& args, int n, std::uint64_t seed, const std::string& out) {
  const RunConfig cfg = args.resolve();
  const auto demos = env::generate_demos(cfg.env_id, n, seed, cfg.workspace, cfg.omni);
  env::write_demos(out, demos, cfg.env_id, seed, cfg.workspace, cfg.omni);
  std::size_t points = 0;
  for (const auto& d : demos) points += d.coords.size();
  fmt::print("wrote {} trajectories ({} points) to {}\n", demos.size(), points, out);
  return 0;
}

// ---------------------------------------------------------------- export-states

int cmd_export(const std::string& checkpoint, int p, int steps, int images, std::string out) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint + "' does not exist");
  const CheckpointInfo info = read_checkpoint_info(checkpoint);
  const RunConfig cfg = parse_config_text(info.config_text);
  std::vector<env::DemoTrajectory> demos;
  if (cfg.weights.dr > 0) demos = load_or_generate_demos(cfg);
  Trainer trainer(cfg, info.seed, std::move(demos));
  trainer.load_checkpoint(checkpoint);

  if (out.empty()) out = (fs::path(checkpoint).parent_path() / "export").string();
  fs::create_directories(out);
  Rng rng(derive_seed(info.seed, 100));
  stategraph::RolloutSource src{cfg.env_id, cfg.workspace, cfg.omni, cfg.observation};
  Mat kept;
  const stategraph::StateSnapshot snap =
      stategraph::collect_snapshot(trainer.model(), src, steps, rng, trainer.episodes(), images, &kept);
  const stategraph::ProjectionResult proj = stategraph::pca_project(snap, p);

  std::optional<double> mmd;
  if (trainer.demo_coords().cols() > 0) mmd = stategraph::domain_mmd(snap, cfg.split, trainer.demo_coords(), rng);
  stategraph::SnapshotMeta meta{env::to_string(cfg.env_id), cfg.weights.shorthand(), cfg.split, mmd};
  const std::string csv = stategraph::write_snapshot(out, snap, meta, &proj);
  stategraph::write_projection(out, snap.episode, proj, snap.rewards, cfg.env_id == env::EnvId::mobile);
  if (images > 0) {
    // A decoder that never received reconstruction gradients is not exported.
    srl::SrlModel* srl = trainer.model().has_srl() && cfg.weights.ae > 0 ? &trainer.model().srl() : nullptr;
    stategraph::export_reconstructions(trainer.model().encoder(), srl, kept, cfg.workspace.image_size, out,
                                       "recon_" + stategraph::episode_tag(snap.episode));
  }
  fmt::print("episode {} states {}x{} explained {:.4f}\n", snap.episode, snap.states.rows(), snap.states.cols(),
             fmt::join(proj.explained_variance_ratio.data(),
                       proj.explained_variance_ratio.data() + proj.explained_variance_ratio.size(), " "));
  if (mmd) fmt::print("domain mmd {:.6f}\n", *mmd);
  fmt::print("wrote {}\n", csv);
  return 0;
}

int fail(const char* kind, const std::string& msg) {
  std::string line = msg;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "error: " << kind << ": " << line << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POAR: simultaneous state representation learning and PPO"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  ConfigArgs train_args;
  TrainOptions train_opts;
  bool dry_run = false;
  auto* train = app.add_subcommand("train", "Train every configured seed");
  train_args.add_to(train);
  train->add_flag("--overwrite", train_opts.overwrite, "Discard existing seed directories");
  train->add_flag("--resume", train_opts.resume, "Continue from existing checkpoints");
  train->add_flag("--force", train_opts.allow_config_mismatch, "Resume even if the configuration changed");
  train->add_flag("--dry-run", dry_run, "Print the resolved configuration and exit");

  std::vector<std::string> eval_dirs;
  std::string baseline = "ppo_baseline";
  std::optional<double> target;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Policy-regret table from finished runs");
  eval->add_option("runs", eval_dirs, "Run directories")->required();
  eval->add_option("--baseline", baseline, "Label of the normalizing run");
  eval->add_option("--target", target, "Target reward (default: scripted expert mean)");
  eval->add_option("-o,--out", eval_out, "Metrics CSV path (default: <first run>/metrics.csv)");

  ConfigArgs demo_args;
  int demo_n = 50;
  std::uint64_t demo_seed = 1000;
  std::string demo_out;
  auto* demos = app.add_subcommand("demos", "Generate scripted expert demonstrations");
  demo_args.add_to(demos);
  demos->add_option("-n,--count", demo_n, "Trajectories")->check(CLI::PositiveNumber);
  demos->add_option("--demo-seed", demo_seed, "Generator seed");
  demos->add_option("--out", demo_out, "Output directory")->required();

  std::string ckpt;
  int export_p = 2;
  int export_steps = 2000;
  int export_images = 0;
  std::string export_out;
  auto* exp = app.add_subcommand("export-states", "State-graph projection from a checkpoint");
  exp->add_option("checkpoint", ckpt, "checkpoint.bin")->required();
  exp->add_option("-p", export_p, "Projection dimension")->check(CLI::IsMember({2, 3}));
  exp->add_option("--steps", export_steps, "Rollout steps")->check(CLI::PositiveNumber);
  exp->add_option("--reconstructions", export_images, "Reconstruction pairs to write (needs a decoder)");
  exp->add_option("-o,--out", export_out, "Output directory (default: <checkpoint dir>/export)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*train) return cmd_train(train_args, train_opts, dry_run);
    if (*eval) return cmd_eval(eval_dirs, baseline, target, eval_out);
    if (*demos) return cmd_demos(demo_args, demo_n, demo_seed, demo_out);
    if (*exp) return cmd_export(ckpt, export_p, export_steps, export_images, export_out);
  } catch (const poar::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

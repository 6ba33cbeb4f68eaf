#include "poar/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "poar/error.hpp"

namespace poar::metrics {
namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

void LearningCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].reward)) {
      throw DegenerateInputError("learning curve: non-finite reward at row " + std::to_string(i));
    }
    if (i > 0 && points[i].global_step <= points[i - 1].global_step) {
      throw DegenerateInputError("learning curve: global_step not strictly increasing at row " +
                                 std::to_string(i));
    }
  }
}

std::vector<double> LearningCurve::rewards() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.reward);
  return out;
}

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  if (window < 1) throw UsageError("moving_average: window must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> prefix(xs.size() + 1, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + xs[i];
  std::vector<double> out(xs.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double policy_regret(const LearningCurve& curve, double target_reward, int window) {
  if (curve.points.size() < 2) {
    throw DegenerateInputError("policy_regret: curve needs at least two points");
  }
  curve.validate();
  const std::vector<double> smooth = moving_average(curve.rewards(), window);
  double total = 0.0;
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    const double dx = static_cast<double>(curve.points[i].global_step - curve.points[i - 1].global_step);
    total += 0.5 * dx * ((target_reward - smooth[i - 1]) + (target_reward - smooth[i]));
  }
  return total;
}

double final_window_reward(const LearningCurve& curve) {
  if (curve.points.empty()) throw DegenerateInputError("final_window_reward: empty curve");
  const std::size_t n = curve.points.size();
  const std::size_t k = std::max<std::size_t>(1, n / 10);
  double sum = 0.0;
  for (std::size_t i = n - k; i < n; ++i) sum += curve.points[i].reward;
  return sum / static_cast<double>(k);
}

std::vector<RegretResult> normalize_and_tabulate(const ModeCurves& runs, const std::string& baseline_mode,
                                                 double target_reward) {
  const auto base = std::find_if(runs.begin(), runs.end(), [&](const auto& r) { return r.first == baseline_mode; });
  if (base == runs.end() || base->second.empty()) {
    throw UsageError("normalize_and_tabulate: baseline mode '" + baseline_mode + "' has no curves");
  }
  std::vector<RegretResult> rows;
  for (const auto& [mode, curves] : runs) {
    if (curves.empty()) throw UsageError("normalize_and_tabulate: mode '" + mode + "' has no curves");
    RegretResult r;
    r.mode = mode;
    std::vector<double> finals;
    for (const auto& c : curves) {
      r.raw_regrets.push_back(policy_regret(c, target_reward));
      finals.push_back(final_window_reward(c));
    }
    std::tie(r.regret_mean, r.regret_std) = mean_std(r.raw_regrets);
    std::tie(r.reward_mean, r.reward_std) = mean_std(finals);
    rows.push_back(std::move(r));
  }
  const auto base_row = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.mode == baseline_mode; });
  const double denom = base_row->regret_mean;
  if (denom == 0.0) throw DegenerateInputError("normalize_and_tabulate: baseline regret is zero");
  for (auto& r : rows) r.normalized = r.regret_mean / denom;
  return rows;
}

std::string format_metrics_csv(const std::vector<RegretResult>& rows) {
  std::string out = "mode,regret_mean,regret_std,normalized,reward_mean,reward_std\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{:.6f},{},{}\n", r.mode, r.regret_mean, r.regret_std, r.normalized,
                       r.reward_mean, r.reward_std);
  }
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<RegretResult>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics table '" + path + "'");
  out << format_metrics_csv(rows);
}

double interpolate(const LearningCurve& curve, double step) {
  const auto& pts = curve.points;
  if (pts.empty()) throw DegenerateInputError("interpolate: empty curve");
  if (step < static_cast<double>(pts.front().global_step) || step > static_cast<double>(pts.back().global_step)) {
    throw UsageError("interpolate: step outside the curve's range");
  }
  const auto it = std::lower_bound(pts.begin(), pts.end(), step,
                                   [](const CurvePoint& p, double s) { return static_cast<double>(p.global_step) < s; });
  if (it == pts.begin()) return it->reward;
  const auto prev = it - 1;
  const double x0 = static_cast<double>(prev->global_step);
  const double x1 = static_cast<double>(it->global_step);
  const double t = (step - x0) / (x1 - x0);
  return prev->reward + t * (it->reward - prev->reward);
}

AggregateCurve aggregate_seeds(const std::vector<LearningCurve>& curves, int grid_points) {
  if (curves.size() < 2) throw UsageError("aggregate_seeds: need at least two curves");
  if (grid_points < 2) throw UsageError("aggregate_seeds: grid needs at least two points");
  double lo = -INFINITY;
  double hi = INFINITY;
  for (const auto& c : curves) {
    if (c.points.empty()) throw DegenerateInputError("aggregate_seeds: empty curve");
    c.validate();
    lo = std::max(lo, static_cast<double>(c.points.front().global_step));
    hi = std::min(hi, static_cast<double>(c.points.back().global_step));
  }
  if (!(lo < hi)) throw UsageError("aggregate_seeds: curves have no overlapping step range");
  AggregateCurve out;
  std::vector<double> vals(curves.size());
  for (int g = 0; g < grid_points; ++g) {
    const double step = g == grid_points - 1 ? hi : lo + (hi - lo) * g / (grid_points - 1);
    for (std::size_t k = 0; k < curves.size(); ++k) vals[k] = interpolate(curves[k], step);
    const auto [m, s] = mean_std(vals);
    out.steps.push_back(step);
    out.mean.push_back(m);
    out.std.push_back(s);
  }
  return out;
}

void write_curve_csv(const std::string& path, const LearningCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve '" + path + "'");
  out << "global_step,episode,reward\n";
  for (const auto& p : curve.points) out << fmt::format("{},{},{}\n", p.global_step, p.episode, p.reward);
  if (!out) throw IoError("failed writing curve '" + path + "'");
}

LearningCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read curve '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "global_step,episode,reward") {
    throw IoError("'" + path + "': expected header global_step,episode,reward");
  }
  LearningCurve curve;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    CurvePoint p;
    char c1 = 0;
    char c2 = 0;
    if (!(ss >> p.global_step >> c1 >> p.episode >> c2 >> p.reward) || c1 != ',' || c2 != ',') {
      throw IoError("'" + path + "': malformed row " + std::to_string(row));
    }
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

}  // namespace poar::metrics

#include "poar/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "poar/error.hpp"

namespace poar::srl {
namespace {

void check_inputs(const Mat& x, const Mat& y) {
  if (x.cols() == 0 || y.cols() == 0) throw UsageError("mmd_loss: sample sets must be non-empty");
  if (x.rows() != y.rows()) {
    throw ConfigError("mmd_loss: dimension mismatch (" + std::to_string(x.rows()) + " vs " +
                      std::to_string(y.rows()) + ")");
  }
}

Mat squared_distances(const Mat& a, const Mat& b) {
  const Eigen::VectorXd na = a.colwise().squaredNorm().transpose();
  const Eigen::RowVectorXd nb = b.colwise().squaredNorm();
  Mat d = -2.0 * (a.transpose() * b);
  d.colwise() += na;
  d.rowwise() += nb;
  return d.cwiseMax(0.0);
}

struct PairDistance {
  double dist;
  Eigen::Index i;
  Eigen::Index j;
};

struct Median {
  double value = 0.0;
  // Pairs whose distance defines the median, each with weight 1/count.
  std::vector<PairDistance> pairs;
};

Median median_pair_distance(const Mat& z) {
  const Eigen::Index n = z.cols();
  std::vector<PairDistance> all;
  all.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  const Mat d2 = squared_distances(z, z);
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) all.push_back({std::sqrt(d2(i, j)), i, j});
  }
  Median med;
  if (all.empty()) return med;
  auto by_dist = [](const PairDistance& a, const PairDistance& b) { return a.dist < b.dist; };
  const std::size_t k = all.size() / 2;
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), by_dist);
  const PairDistance upper = all[k];
  if (all.size() % 2 == 1) {
    med.value = upper.dist;
    med.pairs = {upper};
  } else {
    const PairDistance lower = *std::max_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), by_dist);
    med.value = 0.5 * (lower.dist + upper.dist);
    med.pairs = {lower, upper};
  }
  return med;
}

struct Terms {
  Mat kxx, kyy, kxy;
  Mat dxx, dyy, dxy;
};

}  // namespace

double gaussian_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double sigma) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
}

double median_bandwidth(const Mat& x, const Mat& y) {
  check_inputs(x, y);
  Mat z(x.rows(), x.cols() + y.cols());
  z << x, y;
  return std::max(median_pair_distance(z).value, kMinBandwidth);
}

namespace {

MmdResult mmd_impl(const Mat& x, const Mat& y, double sigma, bool want_grads, Terms& t) {
  const double n = static_cast<double>(x.cols());
  const double m = static_cast<double>(y.cols());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  t.dxx = squared_distances(x, x);
  t.dyy = squared_distances(y, y);
  t.dxy = squared_distances(x, y);
  t.kxx = (-t.dxx * inv2s2).array().exp().matrix();
  t.kyy = (-t.dyy * inv2s2).array().exp().matrix();
  t.kxy = (-t.dxy * inv2s2).array().exp().matrix();

  MmdResult r;
  r.bandwidth = sigma;
  r.raw = t.kxx.sum() / (n * n) + t.kyy.sum() / (m * m) - 2.0 * t.kxy.sum() / (n * m);
  r.value = std::max(r.raw, 0.0);
  if (!want_grads) return r;

  const double s2 = sigma * sigma;
  // sum_j K_ij (a_i - b_j) = a_i * rowsum_i - (B K^T)_i
  const Eigen::RowVectorXd kxx_rows = t.kxx.rowwise().sum().transpose();
  const Eigen::RowVectorXd kyy_rows = t.kyy.rowwise().sum().transpose();
  const Eigen::RowVectorXd kxy_rows = t.kxy.rowwise().sum().transpose();
  const Eigen::RowVectorXd kxy_cols = t.kxy.colwise().sum();

  Mat gxx = x.array().rowwise() * kxx_rows.array();
  gxx -= x * t.kxx;  // kxx symmetric
  Mat gxy = x.array().rowwise() * kxy_rows.array();
  gxy -= y * t.kxy.transpose();
  r.grad_x = (-2.0 / (n * n * s2)) * gxx + (2.0 / (n * m * s2)) * gxy;

  Mat gyy = y.array().rowwise() * kyy_rows.array();
  gyy -= y * t.kyy;
  Mat gyx = y.array().rowwise() * kxy_cols.array();
  gyx -= x * t.kxy;
  r.grad_y = (-2.0 / (m * m * s2)) * gyy + (2.0 / (n * m * s2)) * gyx;
  return r;
}

}  // namespace

MmdResult mmd_fixed(const Mat& x, const Mat& y, double sigma, bool want_grads) {
  check_inputs(x, y);
  if (!(sigma > 0.0)) throw ConfigError("mmd: bandwidth must be positive");
  Terms t;
  return mmd_impl(x, y, sigma, want_grads, t);
}

MmdResult mmd_loss(const Mat& x, const Mat& y, bool want_grads) {
  check_inputs(x, y);
  Mat z(x.rows(), x.cols() + y.cols());
  z << x, y;
  const Median med = median_pair_distance(z);
  const bool floored = !(med.value > kMinBandwidth);
  const double sigma = floored ? kMinBandwidth : med.value;

  Terms t;
  MmdResult r = mmd_impl(x, y, sigma, want_grads, t);
  if (!want_grads || floored || med.pairs.empty()) return r;

  // d raw / d sigma = sum over terms of weight * K * D2 / sigma^3
  const double n = static_cast<double>(x.cols());
  const double m = static_cast<double>(y.cols());
  const double s3 = sigma * sigma * sigma;
  const double dsigma = (t.kxx.cwiseProduct(t.dxx).sum() / (n * n) +
                         t.kyy.cwiseProduct(t.dyy).sum() / (m * m) -
                         2.0 * t.kxy.cwiseProduct(t.dxy).sum() / (n * m)) /
                        s3;
  const double share = dsigma / static_cast<double>(med.pairs.size());
  auto column_grad = [&](Eigen::Index idx) -> Eigen::Block<Mat, Eigen::Dynamic, 1, true> {
    return idx < x.cols() ? r.grad_x.col(idx) : r.grad_y.col(idx - x.cols());
  };
  for (const auto& p : med.pairs) {
    if (p.dist <= 0.0) continue;
    const Eigen::VectorXd unit = (z.col(p.i) - z.col(p.j)) / p.dist;
    column_grad(p.i) += share * unit;
    column_grad(p.j) -= share * unit;
  }
  return r;
}

}  // namespace poar::srl

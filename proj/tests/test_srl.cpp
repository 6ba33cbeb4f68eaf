#include <gtest/gtest.h>

#include <cmath>

#include "checks.hpp"
#include "poar/error.hpp"
#include "poar/mmd.hpp"
#include "poar/srl.hpp"

using namespace poar;
using namespace poar::srl;

namespace {

StateSplit small_split(int fw = 4) {
  StateSplit s;
  s.dim_reward = 3;
  s.dim_inverse = 3;
  s.dim_forward = fw;
  s.dim_domain = std::min(2, fw);
  return s;
}

EncoderSpec small_encoder(const StateSplit& s) {
  EncoderSpec e;
  e.image_size = 16;
  e.channels = {2, 4};
  e.latent_dim = s.total();
  return e;
}

void zero(const ParamList& ps) {
  for (auto* p : ps) p->value.setZero();
}

nn::Dense& last_dense(nn::Sequential& net) { return dynamic_cast<nn::Dense&>(net.layer(net.size() - 1)); }

Mat uniform(Eigen::Index r, Eigen::Index c, Rng& rng) {
  return Mat::NullaryExpr(r, c, [&] { return uniform01(rng); });
}

}  // namespace

TEST(Weights, ShorthandParsing) {
  const SRLWeights w = SRLWeights::parse("a10r5f1d2");
  EXPECT_EQ(w.ae, 10);
  EXPECT_EQ(w.rw, 5);
  EXPECT_EQ(w.iv, 0);
  EXPECT_EQ(w.fw, 1);
  EXPECT_EQ(w.dr, 2);
  EXPECT_EQ(SRLWeights::parse(w.shorthand()), w);
  const SRLWeights f = SRLWeights::parse("a0.5i1");
  EXPECT_EQ(f.ae, 0.5);
  EXPECT_EQ(f.iv, 1);
  EXPECT_THROW(SRLWeights::parse("x3"), ConfigError);
  EXPECT_THROW(SRLWeights::parse("a"), ConfigError);
  EXPECT_THROW(SRLWeights::parse("a1a2"), ConfigError);
  EXPECT_THROW(SRLWeights{}.validate(true), ConfigError);
}

TEST(Split, SlicesAndValidation) {
  StateSplit s;
  EXPECT_EQ(s.total(), 220);
  EXPECT_EQ(s.reward_slice().offset, 0);
  EXPECT_EQ(s.inverse_slice().offset, 120);
  EXPECT_EQ(s.forward_slice().offset, 170);
  EXPECT_EQ(s.domain_slice().offset, 170);
  EXPECT_EQ(s.domain_slice().length, 2);
  s.dim_domain = 60;
  EXPECT_THROW(s.validate(), ConfigError);
  s.mode = SplitMode::combination;
  EXPECT_EQ(s.forward_slice().length, 220);
  EXPECT_NO_THROW(s.validate());

  const LatentState st(Vec::LinSpaced(220, 0, 219), StateSplit{});
  EXPECT_EQ(st.reward().size(), 120);
  EXPECT_EQ(st.domain()[0], 170);
}

TEST(Encoder, DeterministicBatchedAndShapeChecked) {
  const StateSplit s = small_split();
  Rng rng(1);
  Encoder enc(small_encoder(s), rng);
  const Mat obs = uniform(enc.input_size(), 5, rng);
  const Mat a = enc.forward(obs);
  EXPECT_EQ(a.rows(), s.total());
  EXPECT_EQ(a.cols(), 5);
  EXPECT_EQ(enc.forward(obs), a);
  for (int j = 0; j < 5; ++j) EXPECT_TRUE(enc.forward(obs.col(j)).isApprox(a.col(j), 1e-14));
  EXPECT_THROW(enc.forward(Mat::Zero(10, 1)), ConfigError);
  // Sensitivity to a parameter.
  enc.params().back()->value(0, 0) += 1e-3;
  EXPECT_NE(enc.forward(obs), a);
}

TEST(Reconstruction, ClosedFormsAndOracle) {
  const StateSplit s = small_split();
  Rng rng(2);
  SrlModel m(s, small_encoder(s), 8, rng);
  const int p = 16 * 16 * 3;
  const Mat states = Mat::Random(s.total(), 2);

  zero(m.decoder_params());
  const double c = 0.3;
  EXPECT_NEAR(m.reconstruction(states, Mat::Constant(p, 2, c), 1.0, false).value, c * c * p, 1e-9);

  Rng rng2(3);
  SrlModel r(s, small_encoder(s), 8, rng2);
  const Mat obs = uniform(p, 6, rng2);
  const Mat st = Mat::Random(s.total(), 6);
  const Mat rec = r.decoder().forward(st);
  double brute = 0.0;
  for (Eigen::Index j = 0; j < 6; ++j)
    for (Eigen::Index i = 0; i < p; ++i) brute += 0.5 * std::pow(rec(i, j) - obs(i, j), 2);
  EXPECT_NEAR(r.reconstruction(st, obs, 1.0, false).value, brute / 3.0, 1e-9);
  // Decoder output has the observation's shape.
  EXPECT_EQ(rec.rows(), p);
}

TEST(ForwardLoss, ScalarCaseAndStopGradient) {
  const StateSplit s = small_split(1);
  Rng rng(4);
  SrlModel m(s, small_encoder(s), 8, rng);
  zero(m.forward_params());
  last_dense(m.forward_head()).bias().value(0, 0) = 0.7;
  Mat st = Mat::Zero(s.total(), 1);
  Mat st1 = Mat::Zero(s.total(), 1);
  st1(s.forward_slice().offset, 0) = -0.2;
  const HeadLoss h = m.forward_loss(st, {2}, st1, 1.0, true);
  EXPECT_NEAR(h.value, 0.81, 1e-14);
  EXPECT_EQ(h.grad_s_t1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ForwardLoss, ElementwiseOracle) {
  const StateSplit s = small_split();
  Rng rng(5);
  SrlModel m(s, small_encoder(s), 8, rng);
  const Mat st = Mat::Random(s.total(), 4);
  const Mat st1 = Mat::Random(s.total(), 4);
  const std::vector<int> a{0, 3, 1, 2};
  Mat in(s.dim_forward + 4, 4);
  in.topRows(s.dim_forward) = st.middleRows(s.forward_slice().offset, s.dim_forward);
  in.bottomRows(4) = one_hot(a, 4);
  const Mat pred = m.forward_head().forward(in);
  const double brute = (pred - st1.middleRows(s.forward_slice().offset, s.dim_forward)).squaredNorm() / 4.0;
  EXPECT_NEAR(m.forward_loss(st, a, st1, 1.0, false).value, brute, 1e-12);
}

TEST(InverseLoss, UniformAndCertainLogits) {
  const StateSplit s = small_split();
  Rng rng(6);
  SrlModel m(s, small_encoder(s), 8, rng);
  zero(m.inverse_params());
  const Mat st = Mat::Random(s.total(), 3);
  EXPECT_NEAR(m.inverse_loss(st, st, {0, 1, 3}, 1.0, false).value, std::log(4.0), 1e-12);
  last_dense(m.inverse_head()).bias().value(2, 0) = 800.0;
  EXPECT_NEAR(m.inverse_loss(st, st, {2, 2, 2}, 1.0, false).value, 0.0, 1e-12);

  const Mat logits = Mat::Random(4, 5) * 3.0;
  const std::vector<int> labels{0, 1, 2, 3, 1};
  double brute = 0.0;
  for (int j = 0; j < 5; ++j) brute += std::log(logits.col(j).array().exp().sum()) - logits(labels[j], j);
  EXPECT_NEAR(softmax_cross_entropy(logits, labels).value, brute / 5.0, 1e-12);
}

TEST(RewardLoss, Examples) {
  const StateSplit s = small_split();
  Rng rng(7);
  SrlModel m(s, small_encoder(s), 8, rng);
  const Mat st = Mat::Random(s.total(), 1);
  Vec r(1);
  r << -1.0;
  zero(m.reward_params());
  EXPECT_NEAR(m.reward_loss(st, st, r, 1.0, false).value, 1.0, 1e-15);
  last_dense(m.reward_head()).bias().value(0, 0) = -1.0;
  EXPECT_NEAR(m.reward_loss(st, st, r, 1.0, false).value, 0.0, 1e-15);
}

TEST(Mmd, IdenticalSetsAndSingletons) {
  Rng rng(8);
  const Mat x = Mat::Random(2, 13);
  EXPECT_LE(mmd_loss(x, x).value, 1e-10);
  Mat a(2, 1), b(2, 1);
  a << 0.1, 0.2;
  b << -0.3, 0.5;
  const double sigma = 0.7;
  EXPECT_NEAR(mmd_fixed(a, b, sigma).value, 2.0 - 2.0 * std::exp(-(a - b).squaredNorm() / (2 * sigma * sigma)), 1e-15);
}

TEST(Mmd, RandomSetsMatchDoubleSum) {
  const Mat x = Mat::Random(2, 17);
  const Mat y = Mat::Random(2, 23) * 0.5;
  EXPECT_NEAR(mmd_loss(x, y).value, checks::mmd_brute_force(x, y), 1e-10);
  EXPECT_NEAR(mmd_loss(x, y).value, mmd_loss(y, x).value, 1e-14);
}

TEST(Mmd, OracleOver100Pairs) {
  const checks::MmdCheck c = checks::mmd_oracle(100, 2024);
  EXPECT_LE(c.max_error, 1e-10);
  EXPECT_LE(c.max_self, 1e-10);
}

TEST(Mmd, Errors) {
  EXPECT_THROW(mmd_loss(Mat(2, 0), Mat::Ones(2, 3)), UsageError);
  EXPECT_THROW(mmd_loss(Mat::Ones(3, 2), Mat::Ones(2, 3)), ConfigError);
  const StateSplit s = small_split();
  Rng rng(9);
  SrlModel m(s, small_encoder(s), 8, rng);
  EXPECT_THROW(m.domain_loss(Mat::Zero(s.total(), 2), Mat::Zero(3, 2), 1.0, false), ConfigError);
}

TEST(TotalLoss, WeightedSumAndLinearity) {
  const StateSplit s = small_split();
  Rng rng(10);
  const EncoderSpec es = small_encoder(s);
  Encoder enc(es, rng);
  SrlModel m(s, es, 8, rng);
  SrlBatch b;
  b.obs_t = uniform(es.input_size(), 6, rng);
  b.obs_t1 = uniform(es.input_size(), 6, rng);
  b.actions = {0, 1, 2, 3, 0, 1};
  b.rewards = Vec::Zero(6);
  b.rewards[2] = 1.0;
  const Mat demo = Mat::Random(2, 12);

  SRLWeights ae_only;
  ae_only.ae = 1.0;
  const SRLLossReport only = m.total_loss(enc, b, demo, ae_only, false);
  EXPECT_EQ(only.total, only.ae);
  EXPECT_EQ(only.rw, 0.0);

  const SRLWeights w = SRLWeights::parse("a10r5f1d2");
  const SRLLossReport r = m.total_loss(enc, b, demo, w, false);
  EXPECT_DOUBLE_EQ(r.total, 10 * r.ae + 5 * r.rw + 1 * r.fw + 2 * r.dr);
  EXPECT_GE(r.dr, 0.0);

  // Doubling the weights doubles the total and keeps shared gradient directions.
  SRLWeights w2 = w;
  w2.ae *= 2;
  w2.rw *= 2;
  w2.fw *= 2;
  w2.dr *= 2;
  nn::zero_grad(enc.params());
  nn::zero_grad(m.params());
  m.total_loss(enc, b, demo, w, true);
  std::vector<Mat> g1;
  for (auto* p : enc.params()) g1.push_back(p->grad);
  nn::zero_grad(enc.params());
  nn::zero_grad(m.params());
  const SRLLossReport r2 = m.total_loss(enc, b, demo, w2, true);
  EXPECT_NEAR(r2.total, 2 * r.total, 1e-12 * std::abs(r.total));
  const auto ps = enc.params();
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_TRUE(ps[i]->grad.isApprox(2.0 * g1[i], 1e-12));
}

TEST(TotalLoss, ZeroWeightHeadsGetNoGradient) {
  const StateSplit s = small_split();
  Rng rng(11);
  const EncoderSpec es = small_encoder(s);
  Encoder enc(es, rng);
  SrlModel m(s, es, 8, rng);
  SrlBatch b;
  b.obs_t = uniform(es.input_size(), 4, rng);
  b.obs_t1 = uniform(es.input_size(), 4, rng);
  b.actions = {0, 1, 2, 3};
  b.rewards = Vec::Ones(4);
  nn::zero_grad(enc.params());
  nn::zero_grad(m.params());
  m.total_loss(enc, b, Mat(2, 0), SRLWeights::parse("i1"), true);
  auto norm = [](const ParamList& ps) { return nn::grad_norm(ps); };
  EXPECT_GT(norm(m.inverse_params()), 0.0);
  EXPECT_EQ(norm(m.forward_params()), 0.0);
  EXPECT_EQ(norm(m.reward_params()), 0.0);
  EXPECT_EQ(norm(m.decoder_params()), 0.0);
  EXPECT_THROW(m.total_loss(enc, b, Mat(2, 0), SRLWeights::parse("d1"), false), ConfigError);
}

TEST(TotalLoss, SplitIsolation) {
  const StateSplit s = small_split();
  Rng rng(12);
  SrlModel m(s, small_encoder(s), 8, rng);
  const Mat st = Mat::Random(s.total(), 4);
  const Mat st1 = Mat::Random(s.total(), 4);
  const std::vector<int> a{0, 1, 2, 3};
  const HeadLoss f = m.forward_loss(st, a, st1, 1.0, true);
  EXPECT_EQ(f.grad_s_t.topRows(s.dim_reward + s.dim_inverse).cwiseAbs().maxCoeff(), 0.0);
  const HeadLoss i = m.inverse_loss(st, st1, a, 1.0, true);
  EXPECT_EQ(i.grad_s_t.topRows(s.dim_reward).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(i.grad_s_t.bottomRows(s.dim_forward).cwiseAbs().maxCoeff(), 0.0);
  const HeadLoss r = m.reward_loss(st, st1, Vec::Ones(4), 1.0, true);
  EXPECT_EQ(r.grad_s_t.bottomRows(s.dim_inverse + s.dim_forward).cwiseAbs().maxCoeff(), 0.0);
  Mat both(s.total(), 8);
  both << st, st1;
  const ReconLoss rec = m.reconstruction(both, Mat::Random(16 * 16 * 3, 8), 1.0, true);
  EXPECT_GT(rec.grad_states.topRows(s.dim_reward).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(rec.grad_states.bottomRows(s.dim_forward).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, FiniteDifferenceSuite) {
  for (const auto& g : checks::gradient_suite(20, 77)) {
    EXPECT_LT(g.max_rel_error, 1e-4) << g.name;
    EXPECT_EQ(g.instances, 20);
  }
}

TEST(Layers, Im2colAdjoint) {
  const nn::ConvGeometry g = nn::ConvGeometry::make(3, 8, 8, 4, 2, 1);
  Rng rng(13);
  const Mat img = Mat::Random(g.image_size(), 2);
  Mat col;
  nn::im2col(g, img.data(), 2, col);
  const Mat other = Mat::Random(col.rows(), col.cols());
  Mat back = Mat::Zero(g.image_size(), 2);
  nn::col2im(g, other, 2, back.data());
  EXPECT_NEAR((col.array() * other.array()).sum(), (img.array() * back.array()).sum(), 1e-10);
}

TEST(Layers, ConvAndTransposeGradients) {
  Rng rng(14);
  nn::Sequential net;
  auto& conv = net.add<nn::Conv2d>(3, 4, 8, 8, 4, 2, 1, "c");
  conv.init(rng, 1.0);
  net.add<nn::Tanh>(conv.out_features());
  auto& up = net.add<nn::ConvTranspose2d>(4, 2, 4, 4, 4, 2, 1, "t");
  up.init(rng, 1.0);
  Mat x = Mat::Random(net.in_features(), 3);
  const Mat target = Mat::Random(net.out_features(), 3);
  auto loss = [&] { return 0.5 * (net.forward(x) - target).squaredNorm(); };
  nn::zero_grad(net.params());
  const Mat gx = net.backward(net.forward(x) - target, true);
  std::vector<checks::GradTarget> t{{&x, gx}};
  for (auto* p : net.params()) t.push_back({&p->value, p->grad});
  EXPECT_LT(checks::finite_difference_error(loss, t), 1e-6);
}

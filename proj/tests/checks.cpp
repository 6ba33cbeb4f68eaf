#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poar/env.hpp"
#include "poar/mmd.hpp"
#include "poar/ppo.hpp"
#include "poar/rng.hpp"
#include "poar/srl.hpp"
#include "poar/stategraph.hpp"
#include "poar/trainer.hpp"

namespace poar::checks {
namespace {

Mat randn(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + std::min(hi - lo, static_cast<int>(uniform01(rng) * (hi - lo + 1)));
}

std::vector<int> random_actions(Eigen::Index b, Rng& rng) {
  std::vector<int> a(static_cast<std::size_t>(b));
  for (auto& x : a) x = uniform_int(rng, 0, env::kNumActions - 1);
  return a;
}

void add_params(std::vector<GradTarget>& t, const nn::ParamList& ps) {
  for (auto* p : ps) t.push_back({&p->value, p->grad});
}

// Fresh layers have zero biases, which can leave pre-activations exactly on a
// ReLU kink; jittering every parameter moves the check to a generic point.
void jitter(const nn::ParamList& ps, Rng& rng) {
  for (auto* p : ps) p->value += randn(p->value.rows(), p->value.cols(), rng, 0.1);
}

srl::StateSplit tiny_split() {
  srl::StateSplit s;
  s.dim_reward = 3;
  s.dim_inverse = 3;
  s.dim_forward = 4;
  s.dim_domain = 2;
  return s;
}

srl::EncoderSpec tiny_encoder(const srl::StateSplit& split) {
  srl::EncoderSpec e;
  e.image_size = 8;
  e.channels = {2, 3};
  e.kernel = 4;
  e.stride = 2;
  e.latent_dim = split.total();
  return e;
}

}  // namespace

// ---------------------------------------------------------------- MMD

double mmd_brute_force(const Mat& x, const Mat& y) {
  Mat z(x.rows(), x.cols() + y.cols());
  z << x, y;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < z.cols(); ++j) d.push_back((z.col(i) - z.col(j)).norm());
  }
  std::sort(d.begin(), d.end());
  double sigma = 0.0;
  if (!d.empty()) sigma = d.size() % 2 == 1 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  sigma = std::max(sigma, srl::kMinBandwidth);

  auto k = [&](const Vec& a, const Vec& b) { return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma)); };
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) sxx += k(x.col(i), x.col(j));
  for (Eigen::Index i = 0; i < y.cols(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j) syy += k(y.col(i), y.col(j));
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j) sxy += k(x.col(i), y.col(j));
  const double n = static_cast<double>(x.cols());
  const double m = static_cast<double>(y.cols());
  return sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m);
}

MmdCheck mmd_oracle(int pairs, std::uint64_t seed) {
  Rng rng(seed);
  MmdCheck out;
  out.pairs = pairs;
  for (int p = 0; p < pairs; ++p) {
    const int n = uniform_int(rng, 1, 64);
    const int m = uniform_int(rng, 1, 64);
    const Mat x = randn(2, n, rng);
    Mat y = randn(2, m, rng, 0.5 + uniform01(rng));
    y.row(0).array() += uniform01(rng) * 2.0 - 1.0;
    const double fast = srl::mmd_loss(x, y).value;
    out.max_error = std::max(out.max_error, std::abs(fast - mmd_brute_force(x, y)));
    out.max_self = std::max(out.max_self, srl::mmd_loss(x, x).value);
  }
  return out;
}

// ---------------------------------------------------------------- finite differences

double finite_difference_error(const std::function<double()>& loss, std::vector<GradTarget>& targets, double h) {
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& t : targets) {
    Mat& v = *t.value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double up = loss();
      v.data()[i] = orig - h;
      const double down = loss();
      v.data()[i] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = t.analytic.data()[i];
      diff2 += (ana - num) * (ana - num);
      a2 += ana * ana;
      n2 += num * num;
    }
  }
  const double scale = std::sqrt(std::max(a2, n2));
  if (scale < 1e-300) return 0.0;
  return std::sqrt(diff2) / scale;
}

std::vector<GradCheck> gradient_suite(int instances, std::uint64_t seed) {
  std::vector<GradCheck> out;
  for (const char* name : {"reconstruction", "reward", "inverse", "forward", "domain", "ppo", "srl_total_loss"}) {
    out.push_back({name, instances, 0.0});
  }
  auto record = [&](std::size_t k, double err) { out[k].max_rel_error = std::max(out[k].max_rel_error, err); };

  Rng rng(seed);
  const srl::StateSplit split = tiny_split();
  const srl::EncoderSpec enc_spec = tiny_encoder(split);
  const Eigen::Index d = split.total();

  for (int inst = 0; inst < instances; ++inst) {
    srl::SrlModel model(split, enc_spec, 5, rng);
    jitter(model.params(), rng);
    const Eigen::Index b = uniform_int(rng, 3, 6);
    Mat s_t = randn(d, b, rng);
    Mat s_t1 = randn(d, b, rng);
    const std::vector<int> actions = random_actions(b, rng);
    Vec rewards(b);
    for (Eigen::Index j = 0; j < b; ++j) rewards[j] = uniform_int(rng, -1, 1);

    {  // reconstruction
      Mat states = randn(d, 2 * b, rng);
      const Mat obs = (randn(enc_spec.input_size(), 2 * b, rng).array() * 0.3 + 0.5).matrix();
      nn::zero_grad(model.decoder_params());
      const srl::ReconLoss r = model.reconstruction(states, obs, 1.0, true);
      std::vector<GradTarget> t{{&states, r.grad_states}};
      add_params(t, model.decoder_params());
      record(0, finite_difference_error([&] { return model.reconstruction(states, obs, 1.0, false).value; }, t));
    }
    {  // reward
      nn::zero_grad(model.reward_params());
      const srl::HeadLoss h = model.reward_loss(s_t, s_t1, rewards, 1.0, true);
      std::vector<GradTarget> t{{&s_t, h.grad_s_t}, {&s_t1, h.grad_s_t1}};
      add_params(t, model.reward_params());
      record(1, finite_difference_error([&] { return model.reward_loss(s_t, s_t1, rewards, 1.0, false).value; }, t));
    }
    {  // inverse
      nn::zero_grad(model.inverse_params());
      const srl::HeadLoss h = model.inverse_loss(s_t, s_t1, actions, 1.0, true);
      std::vector<GradTarget> t{{&s_t, h.grad_s_t}, {&s_t1, h.grad_s_t1}};
      add_params(t, model.inverse_params());
      record(2, finite_difference_error([&] { return model.inverse_loss(s_t, s_t1, actions, 1.0, false).value; }, t));
    }
    {  // forward: the next state is a stop-gradient target, so only s_t and the head are checked
      nn::zero_grad(model.forward_params());
      const srl::HeadLoss h = model.forward_loss(s_t, actions, s_t1, 1.0, true);
      std::vector<GradTarget> t{{&s_t, h.grad_s_t}};
      add_params(t, model.forward_params());
      record(3, finite_difference_error([&] { return model.forward_loss(s_t, actions, s_t1, 1.0, false).value; }, t));
    }
    {  // domain resemblance
      const Mat demo = randn(2, uniform_int(rng, 4, 10), rng, 0.5);
      const srl::HeadLoss h = model.domain_loss(s_t, demo, 1.0, true);
      std::vector<GradTarget> t{{&s_t, h.grad_s_t}};
      record(4, finite_difference_error([&] { return model.domain_loss(s_t, demo, 1.0, false).value; }, t));
    }
    {  // PPO loss on logits/values, then through the policy and value networks
      ppo::PPOConfig cfg;
      ppo::PpoMinibatch mb;
      mb.actions = actions;
      mb.advantages = randn(b, 1, rng);
      mb.returns = randn(b, 1, rng);
      Mat logits = randn(env::kNumActions, b, rng);
      Mat values = randn(1, b, rng);
      mb.old_log_probs.resize(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        mb.old_log_probs[j] = ppo::log_softmax(logits.col(j))[actions[static_cast<std::size_t>(j)]] +
                              0.3 * randn(1, 1, rng)(0, 0);
      }
      auto loss_at = [&] { return ppo::ppo_loss(mb, logits, values.row(0), cfg).total; };
      const ppo::PpoLoss l = ppo::ppo_loss(mb, logits, values.row(0), cfg);
      std::vector<GradTarget> t{{&logits, l.grad_logits}, {&values, Mat(l.grad_values)}};
      double err = finite_difference_error(loss_at, t);

      ppo::PolicyValueNet net(static_cast<int>(d), {6, 5}, rng);
      jitter(net.params(), rng);
      Mat states = randn(d, b, rng);
      auto net_loss = [&] {
        const ppo::PolicyOutput o = net.forward(states);
        return ppo::ppo_loss(mb, o.logits, o.values, cfg).total;
      };
      nn::zero_grad(net.params());
      const ppo::PolicyOutput o = net.forward(states);
      const ppo::PpoLoss nl = ppo::ppo_loss(mb, o.logits, o.values, cfg);
      const Mat gs = net.backward(nl.grad_logits, nl.grad_values);
      std::vector<GradTarget> tn{{&states, gs}};
      add_params(tn, net.params());
      err = std::max(err, finite_difference_error(net_loss, tn));
      record(5, err);
    }
    {  // weighted total through the encoder
      srl::Encoder encoder(enc_spec, rng);
      jitter(encoder.params(), rng);
      srl::SRLWeights w;
      w.ae = 0.5 + uniform01(rng);
      w.rw = 0.5 + uniform01(rng);
      w.iv = 0.5 + uniform01(rng);
      w.fw = 0.5 + uniform01(rng);
      w.dr = 0.5 + uniform01(rng);
      srl::SrlBatch batch;
      batch.obs_t = Mat::NullaryExpr(enc_spec.input_size(), b, [&] { return uniform01(rng); });
      batch.obs_t1 = Mat::NullaryExpr(enc_spec.input_size(), b, [&] { return uniform01(rng); });
      batch.actions = actions;
      batch.rewards = rewards;
      const Mat demo = randn(2, 8, rng, 0.5);
      // The forward head's next-state target is held constant, so the
      // numeric side freezes it at the unperturbed encoding.
      const Mat frozen_t1 = encoder.forward(batch.obs_t1);
      srl::SRLWeights others = w;
      others.fw = 0.0;
      auto loss = [&] {
        const double rest = model.total_loss(encoder, batch, demo, others, false).total;
        return rest + w.fw * model.forward_loss(encoder.forward(batch.obs_t), batch.actions, frozen_t1, 1.0, false).value;
      };
      nn::zero_grad(encoder.params());
      nn::zero_grad(model.params());
      model.total_loss(encoder, batch, demo, w, true);
      std::vector<GradTarget> t;
      add_params(t, encoder.params());
      add_params(t, model.params());
      record(6, finite_difference_error(loss, t));
    }
  }
  return out;
}

// ---------------------------------------------------------------- GAE

Vec gae_brute_force(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& dones, double bootstrap,
                    double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  auto next_value = [&](Eigen::Index t) { return t + 1 < n ? values[t + 1] : bootstrap; };
  Vec delta(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double cont = dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    delta[t] = rewards[t] + gamma * cont * next_value(t) - values[t];
  }
  Vec adv = Vec::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double weight = 1.0;
    for (Eigen::Index l = t; l < n; ++l) {
      adv[t] += weight * delta[l];
      if (dones[static_cast<std::size_t>(l)]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

GaeCheck gae_oracle(int batches, std::uint64_t seed) {
  Rng rng(seed);
  GaeCheck out;
  out.batches = batches;
  for (int k = 0; k < batches; ++k) {
    const int n = uniform_int(rng, 1, 16);
    const Vec rewards = randn(n, 1, rng);
    const Vec values = randn(n, 1, rng);
    std::vector<std::uint8_t> dones(static_cast<std::size_t>(n));
    for (auto& x : dones) x = uniform01(rng) < 0.2 ? 1 : 0;
    const double bootstrap = randn(1, 1, rng)(0, 0);
    const double gamma = uniform01(rng);
    const double lambda = uniform01(rng);
    const ppo::GaeResult g = ppo::compute_gae(rewards, values, dones, bootstrap, gamma, lambda);
    const Vec ref = gae_brute_force(rewards, values, dones, bootstrap, gamma, lambda);
    out.max_error = std::max(out.max_error, (g.advantages - ref).cwiseAbs().maxCoeff());
    out.max_error = std::max(out.max_error, (g.returns - (ref + values)).cwiseAbs().maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------- PCA

Vec covariance_explained_ratios(const Mat& states) {
  const Mat centered = states.rowwise() - states.colwise().mean();
  const Mat cov = centered.transpose() * centered / static_cast<double>(states.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  Vec ev = es.eigenvalues().reverse().cwiseMax(0.0);
  return ev / ev.sum();
}

PcaCheck pca_oracle(int matrices, std::uint64_t seed) {
  Rng rng(seed);
  PcaCheck out;
  out.matrices = matrices;
  for (int k = 0; k < matrices; ++k) {
    const int m = uniform_int(rng, 30, 150);
    const int dim = uniform_int(rng, 3, 12);
    // Anisotropic so the leading ratios are well separated from noise.
    Mat x = randn(m, dim, rng) * randn(dim, dim, rng);
    const Vec ref = covariance_explained_ratios(x);
    for (int p : {2, 3}) {
      const stategraph::ProjectionResult r = stategraph::pca_project(x, p);
      out.max_error = std::max(out.max_error, (r.explained_variance_ratio - ref.head(p)).cwiseAbs().maxCoeff());
    }
  }
  return out;
}

// ---------------------------------------------------------------- training-loop contracts

RunConfig small_config(TrainMode mode) {
  RunConfig c;
  c.mode = mode;
  c.workspace.image_size = 16;
  c.workspace.episode_length = 40;
  c.encoder_channels = {4, 8};
  c.ppo.n_envs = 2;
  c.ppo.steps_per_update = 64;
  c.ppo.minibatches = 2;
  c.ppo.epochs = 2;
  c.schedule.total_steps = 10'000;
  c.checkpoints = false;
  return c;
}

double max_abs_diff(const nn::ParamList& a, const nn::ParamList& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.size() != b[i]->value.size()) return std::numeric_limits<double>::infinity();
    if (a[i]->value.size() > 0) m = std::max(m, (a[i]->value - b[i]->value).cwiseAbs().maxCoeff());
  }
  return m;
}

AlphaCheck alpha_contract(double alpha, std::uint64_t seed) {
  RunConfig ca = small_config(TrainMode::poar);
  ca.weights.ae = 1.0;
  ca.ppo.max_grad_norm = 0.0;
  ca.schedule.alpha = alpha;
  RunConfig c1 = ca;
  c1.schedule.alpha = 1.0;

  Trainer ta(ca, seed);
  Trainer t1(c1, seed);
  ta.use_plain_gradient_steps();
  t1.use_plain_gradient_steps();
  Rollout ra = ta.collect();
  Rollout r1 = t1.collect();
  ta.compute_advantages(ra);
  t1.compute_advantages(r1);
  std::vector<int> idx(ra.frames.size() / 2);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(2 * i);

  const nn::ParamList ea = ta.model().encoder().params();
  const nn::ParamList e1 = t1.model().encoder().params();
  std::vector<Mat> before;
  for (auto* p : ea) before.push_back(p->value);

  const double lr = 0.05;
  ta.rl_step(ra, idx, lr);
  t1.rl_step(r1, idx, lr);

  AlphaCheck out;
  double g_err = 0.0, g_ref = 0.0, u_err = 0.0, u_ref = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const Mat scaled_grad = alpha * e1[i]->grad;
    g_err = std::max(g_err, (ea[i]->grad - scaled_grad).cwiseAbs().maxCoeff());
    g_ref = std::max(g_ref, scaled_grad.cwiseAbs().maxCoeff());
    const Mat da = ea[i]->value - before[i];
    const Mat d1 = alpha * (e1[i]->value - before[i]);
    u_err = std::max(u_err, (da - d1).cwiseAbs().maxCoeff());
    u_ref = std::max(u_ref, d1.cwiseAbs().maxCoeff());
    vmax = std::max(vmax, before[i].cwiseAbs().maxCoeff());
    out.encoder_grad_norm += e1[i]->grad.squaredNorm();
  }
  out.encoder_grad_norm = std::sqrt(out.encoder_grad_norm);
  out.encoder_grad_rel = g_ref > 0 ? g_err / g_ref : std::numeric_limits<double>::infinity();
  out.encoder_update_err = u_err;
  out.encoder_update_rel = u_ref > 0 ? u_err / u_ref : std::numeric_limits<double>::infinity();
  // Each parameter update is rounded once when stored (relative to |value|),
  // and the alpha = 1 difference once more.
  const double eps = std::numeric_limits<double>::epsilon();
  out.update_rounding = 2.0 * eps * (vmax + u_ref / alpha) + eps * u_ref;
  out.policy_max_diff = max_abs_diff(ta.model().policy().params(), t1.model().policy().params());
  return out;
}

DegeneracyCheck mode_degeneracy(int updates, std::uint64_t seed) {
  RunConfig cp = small_config(TrainMode::poar);
  cp.schedule.alpha = 1.0;
  RunConfig cb = small_config(TrainMode::ppo_baseline);
  Trainer tp(cp, seed);
  Trainer tb(cb, seed);
  DegeneracyCheck out;
  out.updates = updates;
  for (int u = 0; u < updates; ++u) {
    tp.update();
    tb.update();
    out.max_param_diff = std::max(out.max_param_diff,
                                  max_abs_diff(tp.model().encoder().params(), tb.model().encoder().params()));
    out.max_param_diff = std::max(out.max_param_diff,
                                  max_abs_diff(tp.model().policy().params(), tb.model().policy().params()));
  }
  out.curves_equal = tp.curve().points == tb.curve().points && !tp.curve().points.empty();
  return out;
}

}  // namespace poar::checks

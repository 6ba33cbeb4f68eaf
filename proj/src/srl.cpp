#include "poar/srl.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "poar/env.hpp"
#include "poar/error.hpp"
#include "poar/mmd.hpp"

namespace poar::srl {

SplitMode parse_split_mode(std::string_view s) {
  if (s == "split") return SplitMode::split;
  if (s == "combination" || s == "comb") return SplitMode::combination;
  throw ConfigError("srl.mode: unknown value '" + std::string(s) + "' (expected split|combination)");
}

std::string to_string(SplitMode m) { return m == SplitMode::split ? "split" : "combination"; }

// ---------------------------------------------------------------- StateSplit

Slice StateSplit::reward_slice() const {
  if (mode == SplitMode::combination) return {0, total()};
  return {0, dim_reward};
}

Slice StateSplit::inverse_slice() const {
  if (mode == SplitMode::combination) return {0, total()};
  return {dim_reward, dim_inverse};
}

Slice StateSplit::forward_slice() const {
  if (mode == SplitMode::combination) return {0, total()};
  return {dim_reward + dim_inverse, dim_forward};
}

Slice StateSplit::domain_slice() const { return {forward_slice().offset, dim_domain}; }

void StateSplit::validate() const {
  if (dim_reward < 0 || dim_inverse < 0 || dim_forward < 0 || dim_domain < 0) {
    throw ConfigError("srl.dim_*: dimensions must be >= 0");
  }
  if (total() < 1) throw ConfigError("srl.dim_*: total state dimension must be >= 1");
  if (mode == SplitMode::split && dim_domain > dim_forward) {
    throw ConfigError("srl.dim_domain: must not exceed srl.dim_forward in split mode");
  }
  if (dim_domain > total()) throw ConfigError("srl.dim_domain: must not exceed the state dimension");
}

LatentState::LatentState(Vec values, const StateSplit& split) : values_(std::move(values)), split_(split) {
  if (values_.size() != split.total()) throw ConfigError("LatentState: size does not match split");
  if (!values_.allFinite()) throw UsageError("LatentState: non-finite entries");
}

// ---------------------------------------------------------------- SRLWeights

SRLWeights SRLWeights::parse(std::string_view text) {
  SRLWeights w;
  if (text == "none") return w;
  if (text.empty()) throw ConfigError("srl.weights: empty weight shorthand");
  bool seen[5] = {false, false, false, false, false};
  std::size_t i = 0;
  while (i < text.size()) {
    const char letter = text[i++];
    double* slot = nullptr;
    int index = 0;
    switch (letter) {
      case 'a': slot = &w.ae; index = 0; break;
      case 'r': slot = &w.rw; index = 1; break;
      case 'i': slot = &w.iv; index = 2; break;
      case 'f': slot = &w.fw; index = 3; break;
      case 'd': slot = &w.dr; index = 4; break;
      default:
        throw ConfigError("srl.weights: unexpected '" + std::string(1, letter) + "' in shorthand '" +
                          std::string(text) + "' (letters a,r,i,f,d)");
    }
    if (seen[index]) {
      throw ConfigError("srl.weights: prior '" + std::string(1, letter) + "' repeated in '" +
                        std::string(text) + "'");
    }
    seen[index] = true;
    const std::size_t start = i;
    while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
    if (start == i) {
      throw ConfigError("srl.weights: missing number after '" + std::string(1, letter) + "' in '" +
                        std::string(text) + "'");
    }
    const std::string number(text.substr(start, i - start));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != number.size()) {
      throw ConfigError("srl.weights: malformed number '" + number + "' in '" + std::string(text) + "'");
    }
    *slot = value;
  }
  return w;
}

std::string SRLWeights::shorthand() const {
  std::ostringstream os;
  auto put = [&](char c, double v) {
    if (v > 0) os << c << v;
  };
  put('a', ae);
  put('r', rw);
  put('i', iv);
  put('f', fw);
  put('d', dr);
  const std::string s = os.str();
  return s.empty() ? "none" : s;
}

void SRLWeights::validate(bool srl_enabled) const {
  const double all[5] = {ae, rw, iv, fw, dr};
  const char* names[5] = {"srl.w_ae", "srl.w_rw", "srl.w_iv", "srl.w_fw", "srl.w_dr"};
  for (int k = 0; k < 5; ++k) {
    if (!std::isfinite(all[k]) || all[k] < 0.0) {
      throw ConfigError(std::string(names[k]) + ": weights must be finite and >= 0");
    }
  }
  if (srl_enabled && !any()) throw ConfigError("srl.weights: at least one weight must be > 0");
}

// ---------------------------------------------------------------- encoder

int EncoderSpec::input_size() const {
  return identity() ? input_dim : image_size * image_size * in_channels;
}

int EncoderSpec::final_size() const {
  int s = image_size;
  for (std::size_t i = 0; i < channels.size(); ++i) s /= stride;
  return s;
}

void EncoderSpec::validate() const {
  if (identity()) {
    if (input_dim < 1) throw ConfigError("encoder: identity encoder needs input_dim >= 1");
    return;
  }
  if (latent_dim < 1) throw ConfigError("encoder.latent_dim: must be >= 1");
  if (in_channels < 1) throw ConfigError("encoder.in_channels: must be >= 1");
  if (kernel < stride || (kernel - stride) % 2 != 0) {
    throw ConfigError("encoder.kernel: kernel - stride must be even and >= 0");
  }
  int s = image_size;
  for (int c : channels) {
    if (c < 1) throw ConfigError("encoder.channels: must be positive");
    if (s % stride != 0 || s / stride < 1) {
      throw ConfigError("encoder: image_size must be divisible by stride^layers");
    }
    s /= stride;
  }
}

Encoder::Encoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  if (spec_.identity()) return;
  int size = spec_.image_size;
  int in_c = spec_.in_channels;
  for (std::size_t l = 0; l < spec_.channels.size(); ++l) {
    const int out_c = spec_.channels[l];
    auto& conv = net_.add<nn::Conv2d>(in_c, out_c, size, size, spec_.kernel, spec_.stride, spec_.pad(),
                                      "encoder.conv" + std::to_string(l));
    conv.init(rng, std::sqrt(2.0));
    net_.add<nn::Relu>(conv.out_features());
    size /= spec_.stride;
    in_c = out_c;
  }
  auto& dense = net_.add<nn::Dense>(static_cast<Eigen::Index>(in_c) * size * size, spec_.latent_dim,
                                    "encoder.fc");
  dense.init(rng, 1.0);
}

int Encoder::latent_dim() const { return spec_.identity() ? spec_.input_dim : spec_.latent_dim; }

Mat Encoder::forward(const Mat& obs) {
  if (obs.rows() != input_size()) {
    throw ConfigError("encode: observation has " + std::to_string(obs.rows()) +
                      " values, encoder expects " + std::to_string(input_size()));
  }
  if (spec_.identity()) return obs;
  return net_.forward(obs);
}

void Encoder::backward(const Mat& grad_states) {
  if (!spec_.identity()) net_.backward(grad_states, false);
}

Decoder::Decoder(const EncoderSpec& spec, Rng& rng) {
  if (spec.identity()) return;
  const int layers = static_cast<int>(spec.channels.size());
  const int f = spec.final_size();
  const int last_c = spec.channels.back();
  auto& dense = net_.add<nn::Dense>(spec.latent_dim, static_cast<Eigen::Index>(last_c) * f * f, "decoder.fc");
  dense.init(rng, std::sqrt(2.0));
  net_.add<nn::Relu>(dense.out_features());
  int size = f;
  for (int l = layers - 1; l >= 0; --l) {
    const int in_c = spec.channels[static_cast<std::size_t>(l)];
    const int out_c = l == 0 ? spec.in_channels : spec.channels[static_cast<std::size_t>(l - 1)];
    auto& deconv = net_.add<nn::ConvTranspose2d>(in_c, out_c, size, size, spec.kernel, spec.stride,
                                                 spec.pad(), "decoder.deconv" + std::to_string(l));
    deconv.init(rng, l == 0 ? 1.0 : std::sqrt(2.0));
    size *= spec.stride;
    if (l > 0) net_.add<nn::Relu>(deconv.out_features());
  }
}

Mat Decoder::forward(const Mat& states) {
  if (net_.empty()) throw ConfigError("decoder: no decoder for an identity encoder");
  return net_.forward(states);
}

Mat Decoder::backward(const Mat& grad_out) { return net_.backward(grad_out, true); }

// ---------------------------------------------------------------- losses

LossGrad squared_error(const Mat& pred, const Mat& target) {
  const double b = static_cast<double>(pred.cols());
  LossGrad out;
  const Mat resid = pred - target;
  out.value = resid.squaredNorm() / b;
  out.grad = (2.0 / b) * resid;
  return out;
}

Mat one_hot(const std::vector<int>& labels, int classes) {
  Mat m = Mat::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= classes) throw UsageError("label outside class range");
    m(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return m;
}

LossGrad softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  const Eigen::Index b = logits.cols();
  LossGrad out;
  out.grad.resize(logits.rows(), b);
  double total = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const double mx = logits.col(j).maxCoeff();
    const Vec e = (logits.col(j).array() - mx).exp().matrix();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw UsageError("label outside class range");
    total += std::log(z) + mx - logits(y, j);
    out.grad.col(j) = e / z;
    out.grad(y, j) -= 1.0;
  }
  out.value = total / static_cast<double>(b);
  out.grad /= static_cast<double>(b);
  return out;
}

// ---------------------------------------------------------------- SrlModel

SrlModel::SrlModel(const StateSplit& split, const EncoderSpec& enc, int hidden, Rng& rng)
    : split_(split), decoder_(enc, rng) {
  split_.validate();
  const std::vector<int> h{hidden};
  const auto fw = split_.forward_slice().length;
  const auto iv = split_.inverse_slice().length;
  const auto rw = split_.reward_slice().length;
  forward_ = nn::make_mlp(fw + env::kNumActions, h, fw, nn::Activation::relu, rng, 1.0, "srl.forward");
  inverse_ = nn::make_mlp(2 * iv, h, env::kNumActions, nn::Activation::relu, rng, 1.0, "srl.inverse");
  reward_ = nn::make_mlp(2 * rw, h, 1, nn::Activation::relu, rng, 1.0, "srl.reward");
}

ParamList SrlModel::params() const {
  ParamList out = decoder_.params();
  for (auto* p : forward_.params()) out.push_back(p);
  for (auto* p : inverse_.params()) out.push_back(p);
  for (auto* p : reward_.params()) out.push_back(p);
  return out;
}

ReconLoss SrlModel::reconstruction(const Mat& states, const Mat& obs, double scale, bool backward) {
  if (states.cols() != obs.cols() || states.cols() % 2 != 0) {
    throw UsageError("reconstruction: expects stacked [o_t | o_t1] batches");
  }
  const double pairs = static_cast<double>(states.cols() / 2);
  const Mat resid = decoder_.forward(states) - obs;
  ReconLoss out;
  out.value = 0.5 * resid.squaredNorm() / pairs;
  if (backward) out.grad_states = decoder_.backward((scale / pairs) * resid);
  return out;
}

HeadLoss SrlModel::forward_loss(const Mat& s_t, const std::vector<int>& actions, const Mat& s_t1,
                                double scale, bool backward) {
  const Slice fs = split_.forward_slice();
  const Eigen::Index b = s_t.cols();
  Mat in(fs.length + env::kNumActions, b);
  in.topRows(fs.length) = rows(s_t, fs);
  in.bottomRows(env::kNumActions) = one_hot(actions, env::kNumActions);
  const Mat pred = forward_.forward(in);
  // The next-state slice is a constant target.
  const LossGrad lg = squared_error(pred, rows(s_t1, fs));
  HeadLoss out;
  out.value = lg.value;
  if (backward) {
    const Mat gin = forward_.backward(scale * lg.grad, true);
    out.grad_s_t = Mat::Zero(s_t.rows(), b);
    rows(out.grad_s_t, fs) = gin.topRows(fs.length);
    out.grad_s_t1 = Mat::Zero(s_t1.rows(), b);
  }
  return out;
}

HeadLoss SrlModel::inverse_loss(const Mat& s_t, const Mat& s_t1, const std::vector<int>& actions,
                                double scale, bool backward) {
  const Slice is = split_.inverse_slice();
  const Eigen::Index b = s_t.cols();
  Mat in(2 * is.length, b);
  in.topRows(is.length) = rows(s_t, is);
  in.bottomRows(is.length) = rows(s_t1, is);
  const LossGrad lg = softmax_cross_entropy(inverse_.forward(in), actions);
  HeadLoss out;
  out.value = lg.value;
  if (backward) {
    const Mat gin = inverse_.backward(scale * lg.grad, true);
    out.grad_s_t = Mat::Zero(s_t.rows(), b);
    out.grad_s_t1 = Mat::Zero(s_t1.rows(), b);
    rows(out.grad_s_t, is) = gin.topRows(is.length);
    rows(out.grad_s_t1, is) = gin.bottomRows(is.length);
  }
  return out;
}

HeadLoss SrlModel::reward_loss(const Mat& s_t, const Mat& s_t1, const Vec& rewards, double scale,
                               bool backward) {
  const Slice rs = split_.reward_slice();
  const Eigen::Index b = s_t.cols();
  Mat in(2 * rs.length, b);
  in.topRows(rs.length) = rows(s_t, rs);
  in.bottomRows(rs.length) = rows(s_t1, rs);
  const LossGrad lg = squared_error(reward_.forward(in), rewards.transpose());
  HeadLoss out;
  out.value = lg.value;
  if (backward) {
    const Mat gin = reward_.backward(scale * lg.grad, true);
    out.grad_s_t = Mat::Zero(s_t.rows(), b);
    out.grad_s_t1 = Mat::Zero(s_t1.rows(), b);
    rows(out.grad_s_t, rs) = gin.topRows(rs.length);
    rows(out.grad_s_t1, rs) = gin.bottomRows(rs.length);
  }
  return out;
}

HeadLoss SrlModel::domain_loss(const Mat& s_t, const Mat& demo_coords, double scale, bool backward) {
  const Slice ds = split_.domain_slice();
  if (ds.length != demo_coords.rows()) {
    throw ConfigError("domain resemblance: srl.dim_domain (" + std::to_string(ds.length) +
                      ") must equal the demo coordinate dimension (" +
                      std::to_string(demo_coords.rows()) + ")");
  }
  const MmdResult r = mmd_loss(rows(s_t, ds), demo_coords, backward);
  HeadLoss out;
  out.value = r.value;
  if (backward) {
    out.grad_s_t = Mat::Zero(s_t.rows(), s_t.cols());
    rows(out.grad_s_t, ds) = scale * r.grad_x;
  }
  return out;
}

SRLLossReport SrlModel::total_loss(Encoder& encoder, const SrlBatch& batch, const Mat& demo_coords,
                                   const SRLWeights& w, bool backward) {
  SRLLossReport report;
  if (!w.any()) return report;
  const Eigen::Index b = batch.obs_t.cols();
  if (b == 0) throw UsageError("srl_total_loss: empty batch");
  if (batch.obs_t1.cols() != b || static_cast<Eigen::Index>(batch.actions.size()) != b ||
      batch.rewards.size() != b) {
    throw UsageError("srl_total_loss: batch fields disagree in length");
  }
  // The domain prior alone only looks at s_t; skip encoding o_t1 then.
  const bool pairs = w.ae > 0 || w.rw > 0 || w.iv > 0 || w.fw > 0;
  const Eigen::Index cols = pairs ? 2 * b : b;
  Mat stacked(batch.obs_t.rows(), cols);
  if (pairs) {
    stacked << batch.obs_t, batch.obs_t1;
  } else {
    stacked = batch.obs_t;
  }
  const Mat states = encoder.forward(stacked);
  const Mat s_t = states.leftCols(b);
  const Mat s_t1 = pairs ? Mat(states.rightCols(b)) : Mat{};
  Mat grad = backward ? Mat::Zero(states.rows(), cols) : Mat{};

  auto accumulate = [&](const HeadLoss& h) {
    if (!backward) return;
    if (h.grad_s_t.size() > 0) grad.leftCols(b) += h.grad_s_t;
    if (pairs && h.grad_s_t1.size() > 0) grad.rightCols(b) += h.grad_s_t1;
  };

  if (w.ae > 0) {
    const ReconLoss r = reconstruction(states, stacked, w.ae, backward);
    report.ae = r.value;
    if (backward) grad += r.grad_states;
  }
  if (w.rw > 0) {
    const HeadLoss h = reward_loss(s_t, s_t1, batch.rewards, w.rw, backward);
    report.rw = h.value;
    accumulate(h);
  }
  if (w.iv > 0) {
    const HeadLoss h = inverse_loss(s_t, s_t1, batch.actions, w.iv, backward);
    report.iv = h.value;
    accumulate(h);
  }
  if (w.fw > 0) {
    const HeadLoss h = forward_loss(s_t, batch.actions, s_t1, w.fw, backward);
    report.fw = h.value;
    accumulate(h);
  }
  if (w.dr > 0) {
    if (demo_coords.cols() == 0) {
      throw ConfigError("srl.w_dr > 0 requires a non-empty demonstration set");
    }
    const HeadLoss h = domain_loss(s_t, demo_coords, w.dr, backward);
    report.dr = h.value;
    accumulate(h);
  }
  report.total = w.ae * report.ae + w.rw * report.rw + w.iv * report.iv + w.fw * report.fw +
                 w.dr * report.dr;
  if (backward) encoder.backward(grad);
  return report;
}

}  // namespace poar::srl

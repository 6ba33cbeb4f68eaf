#pragma once

// State representation learning: the image encoder/decoder pair, the state
// layout shared by the prior heads, and the prior losses (reconstruction,
// forward, inverse, reward, domain resemblance) with their weighted sum.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "poar/nn.hpp"

namespace poar::srl {

using nn::Mat;
using nn::ParamList;
using nn::Rng;
using nn::Vec;

enum class SplitMode { split, combination };

SplitMode parse_split_mode(std::string_view s);
std::string to_string(SplitMode m);

/// Contiguous row range of a state vector.
struct Slice {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

/// Layout of the latent state: [reward | inverse | forward], with the domain
/// slice being the leading `dim_domain` components of the forward slice. In
/// combination mode every head reads the whole state.
struct StateSplit {
  int dim_reward = 120;
  int dim_inverse = 50;
  int dim_forward = 50;
  int dim_domain = 2;
  SplitMode mode = SplitMode::split;

  int total() const { return dim_reward + dim_inverse + dim_forward; }
  Slice reward_slice() const;
  Slice inverse_slice() const;
  Slice forward_slice() const;
  Slice domain_slice() const;
  void validate() const;
  bool operator==(const StateSplit&) const = default;
};

/// A single encoded state with named slice views.
class LatentState {
 public:
  LatentState(Vec values, const StateSplit& split);

  const Vec& values() const { return values_; }
  auto reward() const { return values_.segment(split_.reward_slice().offset, split_.reward_slice().length); }
  auto inverse() const { return values_.segment(split_.inverse_slice().offset, split_.inverse_slice().length); }
  auto forward() const { return values_.segment(split_.forward_slice().offset, split_.forward_slice().length); }
  auto domain() const { return values_.segment(split_.domain_slice().offset, split_.domain_slice().length); }

 private:
  Vec values_;
  StateSplit split_;
};

/// Per-prior loss weights.
struct SRLWeights {
  double ae = 0.0;  // reconstruction
  double rw = 0.0;  // reward
  double iv = 0.0;  // inverse
  double fw = 0.0;  // forward
  double dr = 0.0;  // domain resemblance

  /// Parses shorthand such as "a10r5f1d2" (letters a, r, i, f, d; omitted
  /// priors get weight 0).
  static SRLWeights parse(std::string_view shorthand);
  std::string shorthand() const;
  bool any() const { return ae > 0 || rw > 0 || iv > 0 || fw > 0 || dr > 0; }
  void validate(bool srl_enabled) const;
  bool operator==(const SRLWeights&) const = default;
};

struct SRLLossReport {
  double ae = 0.0;
  double rw = 0.0;
  double iv = 0.0;
  double fw = 0.0;
  double dr = 0.0;
  double total = 0.0;
};

/// Convolutional encoder description. With `channels` empty the encoder is
/// the identity on `input_dim`-vectors (used for ground-truth coordinate
/// states).
struct EncoderSpec {
  int image_size = 64;
  int in_channels = 3;
  std::vector<int> channels{8, 16, 16};
  int kernel = 4;
  int stride = 2;
  int latent_dim = 220;
  int input_dim = 0;  // identity encoder only

  bool identity() const { return channels.empty(); }
  int pad() const { return (kernel - stride) / 2; }
  int input_size() const;
  /// Spatial size after the conv stack.
  int final_size() const;
  void validate() const;
};

class Encoder {
 public:
  Encoder(const EncoderSpec& spec, Rng& rng);

  /// obs: input_size x B -> latent: D x B.
  Mat forward(const Mat& obs);
  void backward(const Mat& grad_states);
  ParamList params() const { return net_.params(); }
  const EncoderSpec& spec() const { return spec_; }
  int latent_dim() const;
  int input_size() const { return spec_.input_size(); }

 private:
  EncoderSpec spec_;
  nn::Sequential net_;
};

/// Mirror of the encoder with transposed convolutions; linear output.
class Decoder {
 public:
  Decoder(const EncoderSpec& spec, Rng& rng);

  Mat forward(const Mat& states);
  Mat backward(const Mat& grad_out);
  ParamList params() const { return net_.params(); }
  nn::Sequential& net() { return net_; }

 private:
  nn::Sequential net_;
};

struct HeadLoss {
  double value = 0.0;
  Mat grad_s_t;   // d(scale * value) / d s_t, full state rows (empty if no backward)
  Mat grad_s_t1;  // d(scale * value) / d s_t1
};

struct ReconLoss {
  double value = 0.0;  // mean over pairs of 0.5 * (|o_t^ - o_t|^2 + |o_t1^ - o_t1|^2)
  Mat grad_states;     // d(scale * value) / d states
};

/// Mean over columns of the squared L2 residual and its gradient.
struct LossGrad {
  double value = 0.0;
  Mat grad;
};
LossGrad squared_error(const Mat& pred, const Mat& target);
/// Mean softmax cross-entropy of `logits` (K x B) against class labels.
LossGrad softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels);
Mat one_hot(const std::vector<int>& labels, int classes);

struct SrlBatch {
  Mat obs_t;   // input_size x B
  Mat obs_t1;  // input_size x B
  std::vector<int> actions;
  Vec rewards;  // r_{t+1}
};

/// Decoder plus the forward/inverse/reward prediction heads.
class SrlModel {
 public:
  SrlModel(const StateSplit& split, const EncoderSpec& enc, int hidden, Rng& rng);

  const StateSplit& split() const { return split_; }

  /// Reconstruction of a stacked batch [o_t | o_t1] from its states.
  ReconLoss reconstruction(const Mat& states, const Mat& obs, double scale, bool backward);
  HeadLoss forward_loss(const Mat& s_t, const std::vector<int>& actions, const Mat& s_t1,
                        double scale, bool backward);
  HeadLoss inverse_loss(const Mat& s_t, const Mat& s_t1, const std::vector<int>& actions,
                        double scale, bool backward);
  HeadLoss reward_loss(const Mat& s_t, const Mat& s_t1, const Vec& rewards, double scale,
                       bool backward);
  /// MMD^2 between the domain slice of `s_t` and normalized demo coordinates (2 x m).
  HeadLoss domain_loss(const Mat& s_t, const Mat& demo_coords, double scale, bool backward);

  /// Full weighted objective. Encodes [o_t | o_t1] with `encoder`; priors with
  /// zero weight are skipped. When `backward` is set, parameter gradients of
  /// the encoder and the active heads are accumulated.
  SRLLossReport total_loss(Encoder& encoder, const SrlBatch& batch, const Mat& demo_coords,
                           const SRLWeights& weights, bool backward);

  Decoder& decoder() { return decoder_; }
  nn::Sequential& forward_head() { return forward_; }
  nn::Sequential& inverse_head() { return inverse_; }
  nn::Sequential& reward_head() { return reward_; }

  ParamList decoder_params() const { return decoder_.params(); }
  ParamList forward_params() const { return forward_.params(); }
  ParamList inverse_params() const { return inverse_.params(); }
  ParamList reward_params() const { return reward_.params(); }
  /// Decoder and all heads.
  ParamList params() const;

 private:
  StateSplit split_;
  Decoder decoder_;
  nn::Sequential forward_;
  nn::Sequential inverse_;
  nn::Sequential reward_;
};

/// Rows of `m` selected by `s`.
inline auto rows(const Mat& m, const Slice& s) { return m.middleRows(s.offset, s.length); }
inline auto rows(Mat& m, const Slice& s) { return m.middleRows(s.offset, s.length); }

}  // namespace poar::srl

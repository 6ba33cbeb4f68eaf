#pragma once

// Minimal dense/convolutional network building blocks with explicit backprop.
//
// Activations are stored as matrices with one sample per column. Image-shaped
// activations use an HWC layout inside each column: element (y, x, c) lives at
// row (y * width + x) * channels + c.

#include <Eigen/Dense>

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace poar::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

void zero_grad(std::span<Param* const> params);
double grad_norm(std::span<Param* const> params);
/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. `max_norm <= 0` disables clipping.
double clip_grad_norm(std::span<Param* const> params, double max_norm);

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Mat forward(const Mat& x) = 0;
  /// Accumulates parameter gradients for the most recent forward pass and
  /// returns the gradient with respect to that pass's input (empty when
  /// `need_input_grad` is false).
  virtual Mat backward(const Mat& grad_out, bool need_input_grad) = 0;
  virtual void collect_params(ParamList& /*out*/) {}
  virtual Eigen::Index in_features() const = 0;
  virtual Eigen::Index out_features() const = 0;
};

class Dense : public Layer {
 public:
  Dense(Eigen::Index in, Eigen::Index out, const std::string& name);

  /// Normal init with std = gain / sqrt(fan_in); zero bias.
  void init(Rng& rng, double gain);

  Mat forward(const Mat& x) override;
  Mat backward(const Mat& grad_out, bool need_input_grad) override;
  void collect_params(ParamList& out) override;
  Eigen::Index in_features() const override { return weight_.value.cols(); }
  Eigen::Index out_features() const override { return weight_.value.rows(); }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  Param weight_;
  Param bias_;
  Mat input_;
};

class Relu : public Layer {
 public:
  explicit Relu(Eigen::Index features) : features_(features) {}
  Mat forward(const Mat& x) override;
  Mat backward(const Mat& grad_out, bool need_input_grad) override;
  Eigen::Index in_features() const override { return features_; }
  Eigen::Index out_features() const override { return features_; }

 private:
  Eigen::Index features_;
  Mat output_;
};

class Tanh : public Layer {
 public:
  explicit Tanh(Eigen::Index features) : features_(features) {}
  Mat forward(const Mat& x) override;
  Mat backward(const Mat& grad_out, bool need_input_grad) override;
  Eigen::Index in_features() const override { return features_; }
  Eigen::Index out_features() const override { return features_; }

 private:
  Eigen::Index features_;
  Mat output_;
};

/// Geometry of a strided 2-D convolution from a (channels, height, width)
/// image to an (out_h, out_w) grid of patches.
struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int out_h = 0;
  int out_w = 0;

  static ConvGeometry make(int channels, int height, int width, int kernel, int stride, int pad);
  int patch_rows() const { return channels * kernel * kernel; }
  int patches() const { return out_h * out_w; }
  int image_size() const { return channels * height * width; }
};

/// Unfolds `count` HWC images starting at `images` into a
/// (patch_rows x patches*count) column matrix.
void im2col(const ConvGeometry& g, const double* images, int count, Mat& col);
/// Adjoint of im2col: scatters-adds columns back into `count` images.
void col2im(const ConvGeometry& g, const Mat& col, int count, double* images);

class Conv2d : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int height, int width, int kernel, int stride,
         int pad, const std::string& name);

  void init(Rng& rng, double gain);

  Mat forward(const Mat& x) override;
  Mat backward(const Mat& grad_out, bool need_input_grad) override;
  void collect_params(ParamList& out) override;
  Eigen::Index in_features() const override { return geom_.image_size(); }
  Eigen::Index out_features() const override {
    return static_cast<Eigen::Index>(out_channels_) * geom_.patches();
  }
  const ConvGeometry& geometry() const { return geom_; }
  int out_channels() const { return out_channels_; }

 private:
  ConvGeometry geom_;
  int out_channels_;
  Param weight_;  // out_channels x (kernel*kernel*in_channels)
  Param bias_;
  Mat input_;
};

/// Transposed convolution: the adjoint of Conv2d with the same kernel, stride
/// and padding, mapping (in_channels, height, width) up to
/// (out_channels, out_height, out_width).
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int height, int width, int kernel,
                  int stride, int pad, const std::string& name);

  void init(Rng& rng, double gain);

  Mat forward(const Mat& x) override;
  Mat backward(const Mat& grad_out, bool need_input_grad) override;
  void collect_params(ParamList& out) override;
  Eigen::Index in_features() const override {
    return static_cast<Eigen::Index>(in_channels_) * in_h_ * in_w_;
  }
  Eigen::Index out_features() const override { return geom_.image_size(); }
  int out_height() const { return geom_.height; }
  int out_width() const { return geom_.width; }

 private:
  // Geometry of the forward convolution this layer is the adjoint of.
  ConvGeometry geom_;
  int in_channels_;
  int in_h_;
  int in_w_;
  Param weight_;  // (kernel*kernel*out_channels) x in_channels
  Param bias_;
  Mat input_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Mat forward(const Mat& x);
  Mat backward(const Mat& grad_out, bool need_input_grad = true);
  ParamList params() const;
  bool empty() const { return layers_.empty(); }
  Eigen::Index in_features() const;
  Eigen::Index out_features() const;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

enum class Activation { relu, tanh };

/// Fully-connected network `in -> hidden... -> out` with the given hidden
/// activation and a linear output layer. The output layer is initialized with
/// `out_gain`.
Sequential make_mlp(Eigen::Index in, const std::vector<int>& hidden, Eigen::Index out,
                    Activation act, Rng& rng, double out_gain, const std::string& name);

class Optimizer {
 public:
  explicit Optimizer(ParamList params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;
  virtual void step(double lr) = 0;
  const ParamList& params() const { return params_; }

 protected:
  ParamList params_;
};

/// Plain gradient descent: value -= lr * grad.
class Sgd : public Optimizer {
 public:
  using Optimizer::Optimizer;
  void step(double lr) override;
};

class Adam : public Optimizer {
 public:
  explicit Adam(ParamList params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);
  void step(double lr) override;

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }

 private:
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

}  // namespace poar::nn

#include "poar/nn.hpp"

#include <algorithm>
#include <cmath>

#include "poar/error.hpp"

namespace poar::nn {
namespace {

// Upper bound on im2col buffer entries; larger batches are processed in chunks.
constexpr Eigen::Index kColBudget = 1 << 16;

int chunk_for(const ConvGeometry& g, int batch) {
  const Eigen::Index per_sample = static_cast<Eigen::Index>(g.patch_rows()) * g.patches();
  const auto n = std::max<Eigen::Index>(1, kColBudget / std::max<Eigen::Index>(1, per_sample));
  return static_cast<int>(std::min<Eigen::Index>(n, batch));
}

void init_normal(Mat& m, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

void check_rows(const Mat& x, Eigen::Index expected, const char* what) {
  if (x.rows() != expected) {
    throw ConfigError(std::string(what) + ": input has " + std::to_string(x.rows()) +
                      " features, expected " + std::to_string(expected));
  }
}

}  // namespace

void zero_grad(std::span<Param* const> params) {
  for (auto* p : params) p->zero_grad();
}

double grad_norm(std::span<Param* const> params) {
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Param* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-12);
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(Eigen::Index in, Eigen::Index out, const std::string& name)
    : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

void Dense::init(Rng& rng, double gain) {
  init_normal(weight_.value, rng, gain / std::sqrt(static_cast<double>(in_features())));
  bias_.value.setZero();
}

Mat Dense::forward(const Mat& x) {
  check_rows(x, in_features(), weight_.name.c_str());
  input_ = x;
  Mat y = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

Mat Dense::backward(const Mat& grad_out, bool need_input_grad) {
  weight_.grad.noalias() += grad_out * input_.transpose();
  bias_.grad.col(0) += grad_out.rowwise().sum();
  if (!need_input_grad) return {};
  return weight_.value.transpose() * grad_out;
}

void Dense::collect_params(ParamList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- activations

Mat Relu::forward(const Mat& x) {
  output_ = x.cwiseMax(0.0);
  return output_;
}

Mat Relu::backward(const Mat& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  return (output_.array() > 0.0).select(grad_out, 0.0);
}

Mat Tanh::forward(const Mat& x) {
  output_ = x.array().tanh().matrix();
  return output_;
}

Mat Tanh::backward(const Mat& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  return (grad_out.array() * (1.0 - output_.array().square())).matrix();
}

// ---------------------------------------------------------------- convolution

ConvGeometry ConvGeometry::make(int channels, int height, int width, int kernel, int stride,
                                int pad) {
  ConvGeometry g;
  g.channels = channels;
  g.height = height;
  g.width = width;
  g.kernel = kernel;
  g.stride = stride;
  g.pad = pad;
  if (channels < 1 || kernel < 1 || stride < 1 || pad < 0) {
    throw ConfigError("convolution: channels, kernel and stride must be positive");
  }
  const int span_h = height + 2 * pad - kernel;
  const int span_w = width + 2 * pad - kernel;
  if (span_h < 0 || span_w < 0) throw ConfigError("convolution: kernel larger than image");
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;
  return g;
}

void im2col(const ConvGeometry& g, const double* images, int count, Mat& col) {
  const int rows = g.patch_rows();
  const int patches = g.patches();
  const int c = g.channels;
  if (col.rows() != rows || col.cols() != static_cast<Eigen::Index>(patches) * count) {
    col.resize(rows, static_cast<Eigen::Index>(patches) * count);
  }
  // With HWC layout one kernel row of a patch is a contiguous run of
  // kernel * channels values whenever it lies fully inside the image.
  const int run = g.kernel * c;
  for (int b = 0; b < count; ++b) {
    const double* img = images + static_cast<std::size_t>(b) * g.image_size();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        double* dst = col.data() + (static_cast<std::size_t>(b) * patches + oy * g.out_w + ox) *
                                       static_cast<std::size_t>(rows);
        const int ix0 = ox * g.stride - g.pad;
        const bool inside_x = ix0 >= 0 && ix0 + g.kernel <= g.width;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          double* d = dst + ky * run;
          if (iy < 0 || iy >= g.height) {
            std::fill(d, d + run, 0.0);
            continue;
          }
          const double* row = img + static_cast<std::size_t>(iy) * g.width * c;
          if (inside_x) {
            std::copy(row + ix0 * c, row + ix0 * c + run, d);
            continue;
          }
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= g.width) {
              std::fill(d + kx * c, d + (kx + 1) * c, 0.0);
            } else {
              std::copy(row + ix * c, row + (ix + 1) * c, d + kx * c);
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const Mat& col, int count, double* images) {
  const int rows = g.patch_rows();
  const int patches = g.patches();
  const int c = g.channels;
  const int run = g.kernel * c;
  for (int b = 0; b < count; ++b) {
    double* img = images + static_cast<std::size_t>(b) * g.image_size();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const double* src = col.data() +
                            (static_cast<std::size_t>(b) * patches + oy * g.out_w + ox) *
                                static_cast<std::size_t>(rows);
        const int ix0 = ox * g.stride - g.pad;
        const bool inside_x = ix0 >= 0 && ix0 + g.kernel <= g.width;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const double* s = src + ky * run;
          double* row = img + static_cast<std::size_t>(iy) * g.width * c;
          if (inside_x) {
            double* d = row + ix0 * c;
            for (int i = 0; i < run; ++i) d[i] += s[i];
            continue;
          }
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= g.width) continue;
            double* d = row + ix * c;
            for (int ch = 0; ch < c; ++ch) d[ch] += s[kx * c + ch];
          }
        }
      }
    }
  }
}

Conv2d::Conv2d(int in_channels, int out_channels, int height, int width, int kernel, int stride,
               int pad, const std::string& name)
    : geom_(ConvGeometry::make(in_channels, height, width, kernel, stride, pad)),
      out_channels_(out_channels),
      weight_(name + ".weight", out_channels, geom_.patch_rows()),
      bias_(name + ".bias", out_channels, 1) {}

void Conv2d::init(Rng& rng, double gain) {
  init_normal(weight_.value, rng, gain / std::sqrt(static_cast<double>(geom_.patch_rows())));
  bias_.value.setZero();
}

Mat Conv2d::forward(const Mat& x) {
  check_rows(x, in_features(), weight_.name.c_str());
  input_ = x;
  const int batch = static_cast<int>(x.cols());
  const int patches = geom_.patches();
  Mat out(out_features(), batch);
  Mat col;
  const int chunk = chunk_for(geom_, batch);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    im2col(geom_, x.data() + static_cast<std::size_t>(b0) * x.rows(), nb, col);
    Eigen::Map<Mat> o(out.data() + static_cast<std::size_t>(b0) * out.rows(), out_channels_,
                      static_cast<Eigen::Index>(patches) * nb);
    o.noalias() = weight_.value * col;
    o.colwise() += bias_.value.col(0);
  }
  return out;
}

Mat Conv2d::backward(const Mat& grad_out, bool need_input_grad) {
  const int batch = static_cast<int>(grad_out.cols());
  const int patches = geom_.patches();
  Mat grad_in;
  if (need_input_grad) grad_in = Mat::Zero(in_features(), batch);
  Mat col;
  Mat dcol;
  const int chunk = chunk_for(geom_, batch);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    Eigen::Map<const Mat> g(grad_out.data() + static_cast<std::size_t>(b0) * grad_out.rows(),
                            out_channels_, static_cast<Eigen::Index>(patches) * nb);
    im2col(geom_, input_.data() + static_cast<std::size_t>(b0) * input_.rows(), nb, col);
    weight_.grad.noalias() += g * col.transpose();
    bias_.grad.col(0) += g.rowwise().sum();
    if (need_input_grad) {
      dcol.noalias() = weight_.value.transpose() * g;
      col2im(geom_, dcol, nb, grad_in.data() + static_cast<std::size_t>(b0) * grad_in.rows());
    }
  }
  return grad_in;
}

void Conv2d::collect_params(ParamList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int height, int width,
                                 int kernel, int stride, int pad, const std::string& name)
    : in_channels_(in_channels), in_h_(height), in_w_(width) {
  const int out_h = (height - 1) * stride - 2 * pad + kernel;
  const int out_w = (width - 1) * stride - 2 * pad + kernel;
  if (out_h < 1 || out_w < 1) throw ConfigError(name + ": transposed convolution output is empty");
  geom_ = ConvGeometry::make(out_channels, out_h, out_w, kernel, stride, pad);
  if (geom_.out_h != height || geom_.out_w != width) {
    throw ConfigError(name + ": transposed convolution geometry is not invertible");
  }
  weight_ = Param(name + ".weight", geom_.patch_rows(), in_channels);
  bias_ = Param(name + ".bias", out_channels, 1);
}

void ConvTranspose2d::init(Rng& rng, double gain) {
  // Each output pixel receives roughly in_channels * (kernel/stride)^2 terms.
  const double ratio = static_cast<double>(geom_.kernel) / geom_.stride;
  const double fan_in = in_channels_ * ratio * ratio;
  init_normal(weight_.value, rng, gain / std::sqrt(fan_in));
  bias_.value.setZero();
}

Mat ConvTranspose2d::forward(const Mat& x) {
  check_rows(x, in_features(), weight_.name.c_str());
  input_ = x;
  const int batch = static_cast<int>(x.cols());
  const int patches = geom_.patches();
  Mat out = Mat::Zero(out_features(), batch);
  Mat col;
  const int chunk = chunk_for(geom_, batch);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    Eigen::Map<const Mat> xin(x.data() + static_cast<std::size_t>(b0) * x.rows(), in_channels_,
                              static_cast<Eigen::Index>(patches) * nb);
    col.noalias() = weight_.value * xin;
    col2im(geom_, col, nb, out.data() + static_cast<std::size_t>(b0) * out.rows());
  }
  Eigen::Map<Mat> per_channel(out.data(), geom_.channels,
                              out.size() / geom_.channels);
  per_channel.colwise() += bias_.value.col(0);
  return out;
}

Mat ConvTranspose2d::backward(const Mat& grad_out, bool need_input_grad) {
  const int batch = static_cast<int>(grad_out.cols());
  const int patches = geom_.patches();
  Eigen::Map<const Mat> per_channel(grad_out.data(), geom_.channels,
                                    grad_out.size() / geom_.channels);
  bias_.grad.col(0) += per_channel.rowwise().sum();
  Mat grad_in;
  if (need_input_grad) grad_in = Mat::Zero(in_features(), batch);
  Mat col;
  const int chunk = chunk_for(geom_, batch);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    im2col(geom_, grad_out.data() + static_cast<std::size_t>(b0) * grad_out.rows(), nb, col);
    Eigen::Map<const Mat> xin(input_.data() + static_cast<std::size_t>(b0) * input_.rows(),
                              in_channels_, static_cast<Eigen::Index>(patches) * nb);
    weight_.grad.noalias() += col * xin.transpose();
    if (need_input_grad) {
      Eigen::Map<Mat> gi(grad_in.data() + static_cast<std::size_t>(b0) * grad_in.rows(),
                         in_channels_, static_cast<Eigen::Index>(patches) * nb);
      gi.noalias() = weight_.value.transpose() * col;
    }
  }
  return grad_in;
}

void ConvTranspose2d::collect_params(ParamList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- Sequential

Mat Sequential::forward(const Mat& x) {
  if (layers_.empty()) return x;
  Mat h = layers_.front()->forward(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h);
  return h;
}

Mat Sequential::backward(const Mat& grad_out, bool need_input_grad) {
  if (layers_.empty()) return need_input_grad ? grad_out : Mat{};
  Mat g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, i > 0 || need_input_grad);
  }
  return g;
}

ParamList Sequential::params() const {
  ParamList out;
  for (const auto& l : layers_) l->collect_params(out);
  return out;
}

Eigen::Index Sequential::in_features() const {
  return layers_.empty() ? 0 : layers_.front()->in_features();
}

Eigen::Index Sequential::out_features() const {
  return layers_.empty() ? 0 : layers_.back()->out_features();
}

Sequential make_mlp(Eigen::Index in, const std::vector<int>& hidden, Eigen::Index out,
                    Activation act, Rng& rng, double out_gain, const std::string& name) {
  Sequential net;
  Eigen::Index width = in;
  const double hidden_gain = act == Activation::relu ? std::sqrt(2.0) : 1.0;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    auto& d = net.add<Dense>(width, hidden[i], name + ".fc" + std::to_string(i));
    d.init(rng, hidden_gain);
    if (act == Activation::relu) {
      net.add<Relu>(hidden[i]);
    } else {
      net.add<Tanh>(hidden[i]);
    }
    width = hidden[i];
  }
  auto& last = net.add<Dense>(width, out, name + ".out");
  last.init(rng, out_gain);
  return net;
}

// ---------------------------------------------------------------- optimizers

void Sgd::step(double lr) {
  for (auto* p : params_) p->value.noalias() -= lr * p->grad;
}

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : Optimizer(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step_size = lr / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& g = params_[i]->grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    params_[i]->value.array() -=
        step_size * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps_);
  }
}

}  // namespace poar::nn

#include "mtd/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace mtd::nn {
namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Caffe-style im2col over one {C,H,W} sample.
void im2col(const float* x, int channels, int height, int width, int kernel,
            int stride, int pad, float* col) {
  const int out_h = conv_out_dim(height, kernel, stride, pad);
  const int out_w = conv_out_dim(width, kernel, stride, pad);
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        float* row = col + (static_cast<std::size_t>((c * kernel + ki) * kernel + kj)) *
                               out_h * out_w;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - pad + ki;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - pad + kj;
            row[oh * out_w + ow] =
                (ih >= 0 && ih < height && iw >= 0 && iw < width)
                    ? x[(static_cast<std::size_t>(c) * height + ih) * width + iw]
                    : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int height, int width, int kernel,
            int stride, int pad, float* x) {
  const int out_h = conv_out_dim(height, kernel, stride, pad);
  const int out_w = conv_out_dim(width, kernel, stride, pad);
  std::fill(x, x + static_cast<std::size_t>(channels) * height * width, 0.0f);
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        const float* row = col + (static_cast<std::size_t>((c * kernel + ki) * kernel + kj)) *
                                     out_h * out_w;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= height) continue;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= width) continue;
            x[(static_cast<std::size_t>(c) * height + ih) * width + iw] +=
                row[oh * out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace

float normal_sample(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();  // (0,1]
  const double u2 = rng.uniform();
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(2.0 * M_PI * u2));
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad,
               Rng& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({out_channels, in_channels * kernel * kernel}),
      bias_({out_channels}) {
  const float std = std::sqrt(2.0f / static_cast<float>(in_channels * kernel * kernel));
  for (std::size_t i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * normal_sample(rng);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  input_ = x;
  const int n = x.dim(0), height = x.dim(2), width = x.dim(3);
  const int out_h = conv_out_dim(height, kernel_, stride_, pad_);
  const int out_w = conv_out_dim(width, kernel_, stride_, pad_);
  const int ckk = in_channels_ * kernel_ * kernel_;
  const std::size_t sample = static_cast<std::size_t>(in_channels_) * height * width;
  const std::size_t out_sample = static_cast<std::size_t>(out_channels_) * out_h * out_w;

  Tensor out({n, out_channels_, out_h, out_w});
  std::vector<float> col(static_cast<std::size_t>(ckk) * out_h * out_w);
  MapConstMat w(weight_.value.data(), out_channels_, ckk);
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + i * sample, in_channels_, height, width, kernel_, stride_, pad_,
           col.data());
    MapConstMat col_m(col.data(), ckk, out_h * out_w);
    MapMat y(out.data() + i * out_sample, out_channels_, out_h * out_w);
    y.noalias() = w * col_m;
    for (int oc = 0; oc < out_channels_; ++oc) y.row(oc).array() += bias_.value[oc];
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  const int n = x.dim(0), height = x.dim(2), width = x.dim(3);
  const int out_h = grad_out.dim(2), out_w = grad_out.dim(3);
  const int ckk = in_channels_ * kernel_ * kernel_;
  const std::size_t sample = static_cast<std::size_t>(in_channels_) * height * width;
  const std::size_t out_sample = static_cast<std::size_t>(out_channels_) * out_h * out_w;

  Tensor grad_in({n, in_channels_, height, width});
  std::vector<float> col(static_cast<std::size_t>(ckk) * out_h * out_w);
  std::vector<float> gcol(col.size());
  MapConstMat w(weight_.value.data(), out_channels_, ckk);
  MapMat gw(weight_.grad.data(), out_channels_, ckk);
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + i * sample, in_channels_, height, width, kernel_, stride_, pad_,
           col.data());
    MapConstMat col_m(col.data(), ckk, out_h * out_w);
    MapConstMat gy(grad_out.data() + i * out_sample, out_channels_, out_h * out_w);
    gw.noalias() += gy * col_m.transpose();
    for (int oc = 0; oc < out_channels_; ++oc) bias_.grad[oc] += gy.row(oc).sum();
    MapMat gcol_m(gcol.data(), ckk, out_h * out_w);
    gcol_m.noalias() = w.transpose() * gy;
    col2im(gcol.data(), in_channels_, height, width, kernel_, stride_, pad_,
           grad_in.data() + i * sample);
  }
  return grad_in;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}) {
  const float std = std::sqrt(2.0f / static_cast<float>(in_features));
  for (std::size_t i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * normal_sample(rng);
}

Tensor Linear::forward(const Tensor& x, bool) {
  input_ = x;
  const int n = x.dim(0);
  Tensor out({n, out_features_});
  MapConstMat xm(x.data(), n, in_features_);
  MapConstMat w(weight_.value.data(), out_features_, in_features_);
  MapMat y(out.data(), n, out_features_);
  y.noalias() = xm * w.transpose();
  for (int i = 0; i < n; ++i) {
    float* row = out.data() + static_cast<std::size_t>(i) * out_features_;
    for (int j = 0; j < out_features_; ++j) row[j] += bias_.value[j];
  }
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = input_.dim(0);
  MapConstMat xm(input_.data(), n, in_features_);
  MapConstMat gy(grad_out.data(), n, out_features_);
  MapMat gw(weight_.grad.data(), out_features_, in_features_);
  gw.noalias() += gy.transpose() * xm;
  for (int j = 0; j < out_features_; ++j) bias_.grad[j] += gy.col(j).sum();

  Tensor grad_in({n, in_features_});
  MapConstMat w(weight_.value.data(), out_features_, in_features_);
  MapMat gx(grad_in.data(), n, in_features_);
  gx.noalias() = gy * w;
  return grad_in;
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  input_ = x;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0f) out[i] = 0.0f;
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i)
    if (input_[i] <= 0.0f) grad_in[i] = 0.0f;
  return grad_in;
}

// -------------------------------------------------------------- MaxPool2

Tensor MaxPool2::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  const int n = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const int out_h = height / 2, out_w = width / 2;
  Tensor out({n, channels, out_h, out_w});
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c)
      for (int oh = 0; oh < out_h; ++oh)
        for (int ow = 0; ow < out_w; ++ow, ++o) {
          float best = -1e30f;
          int best_idx = 0;
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) {
              const int ih = oh * 2 + di, iw = ow * 2 + dj;
              const int idx = ((i * channels + c) * height + ih) * width + iw;
              if (x[static_cast<std::size_t>(idx)] > best) {
                best = x[static_cast<std::size_t>(idx)];
                best_idx = idx;
              }
            }
          out[o] = best;
          argmax_[o] = best_idx;
        }
  return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o)
    grad_in[static_cast<std::size_t>(argmax_[o])] += grad_out[o];
  return grad_in;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  const int n = x.dim(0), channels = x.dim(1);
  const int hw = x.dim(2) * x.dim(3);
  Tensor out({n, channels});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c) {
      const float* p = x.data() + (static_cast<std::size_t>(i) * channels + c) * hw;
      float sum = 0.0f;
      for (int k = 0; k < hw; ++k) sum += p[k];
      out[static_cast<std::size_t>(i) * channels + c] = sum / static_cast<float>(hw);
    }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  const int n = in_shape_[0], channels = in_shape_[1];
  const int hw = in_shape_[2] * in_shape_[3];
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c) {
      const float g =
          grad_out[static_cast<std::size_t>(i) * channels + c] / static_cast<float>(hw);
      float* p = grad_in.data() + (static_cast<std::size_t>(i) * channels + c) * hw;
      for (int k = 0; k < hw; ++k) p[k] = g;
    }
  return grad_in;
}

// --------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  const int n = x.dim(0);
  return x.reshaped({n, static_cast<int>(x.size()) / n});
}

Tensor Flatten::backward(const Tensor& grad_out) { return grad_out.reshaped(in_shape_); }

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}),
      beta_({channels}),
      running_mean_({channels}),
      running_var_({channels}) {
  gamma_.value.fill(1.0f);
  running_var_.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  last_train_ = train;
  input_ = x;
  const int n = x.dim(0), height = x.dim(2), width = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  const double m = static_cast<double>(n) * static_cast<double>(hw);

  Tensor out(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);

  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (train) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = x.data() + (static_cast<std::size_t>(i) * channels_ + c) * hw;
        for (std::size_t k = 0; k < hw; ++k) sum += p[k];
      }
      mean = sum / m;
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = x.data() + (static_cast<std::size_t>(i) * channels_ + c) * hw;
        for (std::size_t k = 0; k < hw; ++k) ss += (p[k] - mean) * (p[k] - mean);
      }
      var = ss / m;
      running_mean_[static_cast<std::size_t>(c)] = static_cast<float>(
          (1.0 - momentum_) * running_mean_[static_cast<std::size_t>(c)] + momentum_ * mean);
      running_var_[static_cast<std::size_t>(c)] = static_cast<float>(
          (1.0 - momentum_) * running_var_[static_cast<std::size_t>(c)] + momentum_ * var);
    } else {
      mean = running_mean_[static_cast<std::size_t>(c)];
      var = running_var_[static_cast<std::size_t>(c)];
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[static_cast<std::size_t>(c)] = inv;
    const float g = gamma_.value[static_cast<std::size_t>(c)];
    const float b = beta_.value[static_cast<std::size_t>(c)];
    const float mu = static_cast<float>(mean);
    for (int i = 0; i < n; ++i) {
      const std::size_t base = (static_cast<std::size_t>(i) * channels_ + c) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        const float xh = (x[base + k] - mu) * inv;
        xhat_[base + k] = xh;
        out[base + k] = g * xh + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const int n = input_.dim(0), height = input_.dim(2), width = input_.dim(3);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  const double m = static_cast<double>(n) * static_cast<double>(hw);

  Tensor grad_in(input_.shape());
  for (int c = 0; c < channels_; ++c) {
    const float g = gamma_.value[static_cast<std::size_t>(c)];
    const float inv = inv_std_[static_cast<std::size_t>(c)];
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t base = (static_cast<std::size_t>(i) * channels_ + c) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        sum_gy += grad_out[base + k];
        sum_gy_xhat += grad_out[base + k] * xhat_[base + k];
      }
    }
    gamma_.grad[static_cast<std::size_t>(c)] += static_cast<float>(sum_gy_xhat);
    beta_.grad[static_cast<std::size_t>(c)] += static_cast<float>(sum_gy);

    if (last_train_) {
      const float k1 = static_cast<float>(g * inv / m);
      for (int i = 0; i < n; ++i) {
        const std::size_t base = (static_cast<std::size_t>(i) * channels_ + c) * hw;
        for (std::size_t k = 0; k < hw; ++k) {
          grad_in[base + k] =
              k1 * (static_cast<float>(m) * grad_out[base + k] -
                    static_cast<float>(sum_gy) -
                    xhat_[base + k] * static_cast<float>(sum_gy_xhat));
        }
      }
    } else {
      // Inference statistics are constants, so the map is affine.
      const float k1 = g * inv;
      for (int i = 0; i < n; ++i) {
        const std::size_t base = (static_cast<std::size_t>(i) * channels_ + c) * hw;
        for (std::size_t k = 0; k < hw; ++k) grad_in[base + k] = k1 * grad_out[base + k];
      }
    }
  }
  return grad_in;
}

// ----------------------------------------------------------- ChannelMask

ChannelMask::ChannelMask(int channels) : channels_(channels) {}

void ChannelMask::set_mask(std::vector<float> mask) {
  if (static_cast<int>(mask.size()) != channels_)
    throw std::invalid_argument("ChannelMask: mask size mismatch");
  mask_ = std::move(mask);
}

void ChannelMask::reset_mask() { mask_.clear(); }

void ChannelMask::start_collecting() {
  collecting_ = true;
  activation_sum_.assign(static_cast<std::size_t>(channels_), 0.0);
  collected_ = 0;
}

std::vector<double> ChannelMask::finish_collecting() {
  collecting_ = false;
  std::vector<double> means(activation_sum_.size(), 0.0);
  if (collected_ > 0)
    for (std::size_t c = 0; c < means.size(); ++c)
      means[c] = activation_sum_[c] / static_cast<double>(collected_);
  return means;
}

Tensor ChannelMask::forward(const Tensor& x, bool) {
  const int n = x.dim(0), height = x.dim(2), width = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (collecting_) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < channels_; ++c) {
        const float* p = x.data() + (static_cast<std::size_t>(i) * channels_ + c) * hw;
        double sum = 0.0;
        for (std::size_t k = 0; k < hw; ++k) sum += p[k];
        activation_sum_[static_cast<std::size_t>(c)] += sum / static_cast<double>(hw);
      }
    collected_ += n;
  }
  if (mask_.empty()) return x;
  Tensor out = x;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels_; ++c) {
      float* p = out.data() + (static_cast<std::size_t>(i) * channels_ + c) * hw;
      const float mval = mask_[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < hw; ++k) p[k] *= mval;
    }
  return out;
}

Tensor ChannelMask::backward(const Tensor& grad_out) {
  if (mask_.empty()) return grad_out;
  Tensor grad_in = grad_out;
  const int n = grad_out.dim(0), height = grad_out.dim(2), width = grad_out.dim(3);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels_; ++c) {
      float* p = grad_in.data() + (static_cast<std::size_t>(i) * channels_ + c) * hw;
      const float mval = mask_[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < hw; ++k) p[k] *= mval;
    }
  return grad_in;
}

// ----------------------------------------------------------- PreActBlock

PreActBlock::PreActBlock(int in_channels, int out_channels, int stride, Rng& rng)
    : has_projection_(stride != 1 || in_channels != out_channels),
      bn1_(std::make_unique<BatchNorm2d>(in_channels)),
      bn2_(std::make_unique<BatchNorm2d>(out_channels)),
      relu1_(std::make_unique<ReLU>()),
      relu2_(std::make_unique<ReLU>()),
      conv1_(std::make_unique<Conv2d>(in_channels, out_channels, 3, stride, 1, rng)),
      conv2_(std::make_unique<Conv2d>(out_channels, out_channels, 3, 1, 1, rng)) {
  if (has_projection_)
    projection_ = std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, rng);
}

PreActBlock::PreActBlock(const PreActBlock& other)
    : has_projection_(other.has_projection_),
      bn1_(std::make_unique<BatchNorm2d>(*other.bn1_)),
      bn2_(std::make_unique<BatchNorm2d>(*other.bn2_)),
      relu1_(std::make_unique<ReLU>(*other.relu1_)),
      relu2_(std::make_unique<ReLU>(*other.relu2_)),
      conv1_(std::make_unique<Conv2d>(*other.conv1_)),
      conv2_(std::make_unique<Conv2d>(*other.conv2_)),
      preact_(other.preact_),
      plain_shortcut_from_input_(other.plain_shortcut_from_input_) {
  if (other.projection_) projection_ = std::make_unique<Conv2d>(*other.projection_);
}

Tensor PreActBlock::forward(const Tensor& x, bool train) {
  preact_ = relu1_->forward(bn1_->forward(x, train), train);
  Tensor shortcut;
  if (has_projection_) {
    shortcut = projection_->forward(preact_, train);
    plain_shortcut_from_input_ = false;
  } else {
    shortcut = x;
    plain_shortcut_from_input_ = true;
  }
  Tensor branch = conv2_->forward(
      relu2_->forward(bn2_->forward(conv1_->forward(preact_, train), train), train), train);
  for (std::size_t i = 0; i < branch.size(); ++i) branch[i] += shortcut[i];
  return branch;
}

Tensor PreActBlock::backward(const Tensor& grad_out) {
  Tensor grad_preact =
      conv1_->backward(bn2_->backward(relu2_->backward(conv2_->backward(grad_out))));
  if (has_projection_) {
    const Tensor grad_short = projection_->backward(grad_out);
    for (std::size_t i = 0; i < grad_preact.size(); ++i) grad_preact[i] += grad_short[i];
  }
  Tensor grad_in = bn1_->backward(relu1_->backward(grad_preact));
  if (plain_shortcut_from_input_)
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += grad_out[i];
  return grad_in;
}

std::vector<ParamTensor*> PreActBlock::params() {
  std::vector<ParamTensor*> out;
  for (Layer* l : std::initializer_list<Layer*>{bn1_.get(), conv1_.get(), bn2_.get(),
                                                conv2_.get(), projection_.get()}) {
    if (!l) continue;
    const auto p = l->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<NamedState> PreActBlock::state() {
  std::vector<NamedState> out;
  const std::pair<const char*, Layer*> parts[] = {{"bn1", bn1_.get()},
                                                  {"conv1", conv1_.get()},
                                                  {"bn2", bn2_.get()},
                                                  {"conv2", conv2_.get()},
                                                  {"proj", projection_.get()}};
  for (const auto& [prefix, layer] : parts) {
    if (!layer) continue;
    for (NamedState s : layer->state())
      out.push_back({std::string(prefix) + "." + s.name, s.tensor});
  }
  return out;
}

// ------------------------------------------------------ softmax and loss

Tensor softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0), classes = logits.dim(1);
  Tensor probs(logits.shape());
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * classes;
    float* out = probs.data() + static_cast<std::size_t>(i) * classes;
    float mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      out[c] = std::exp(row[c] - mx);
      sum += out[c];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int c = 0; c < classes; ++c) out[c] *= inv;
  }
  return probs;
}

double mean_cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  const int n = probs.dim(0), classes = probs.dim(1);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const float p = probs[static_cast<std::size_t>(i) * classes + labels[static_cast<std::size_t>(i)]];
    loss -= std::log(std::max(p, 1e-12f));
  }
  return loss / static_cast<double>(n);
}

Tensor cross_entropy_logit_grad(const Tensor& probs, const std::vector<int>& labels) {
  const int n = probs.dim(0), classes = probs.dim(1);
  Tensor grad = probs;
  const float inv_n = 1.0f / static_cast<float>(n);
  for (int i = 0; i < n; ++i) {
    grad[static_cast<std::size_t>(i) * classes + labels[static_cast<std::size_t>(i)]] -= 1.0f;
    for (int c = 0; c < classes; ++c) grad[static_cast<std::size_t>(i) * classes + c] *= inv_n;
  }
  return grad;
}

}  // namespace mtd::nn

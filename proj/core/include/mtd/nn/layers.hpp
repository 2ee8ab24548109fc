#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mtd/rng.hpp"
#include "mtd/tensor.hpp"

namespace mtd::nn {

struct ParamTensor {
  Tensor value;
  Tensor grad;

  explicit ParamTensor(std::vector<int> shape = {})
      : value(shape.empty() ? Tensor() : Tensor(shape)),
        grad(shape.empty() ? Tensor() : Tensor(std::move(shape))) {}
};

/// Named tensor exposed for checkpointing: trainable parameters and
/// persistent buffers (batch-norm running statistics).
struct NamedState {
  std::string name;
  Tensor* tensor;
};

/// Forward/backward layer over {N,C,H,W} or {N,F} batches. forward caches
/// whatever backward needs, so a layer instance must not be shared across
/// threads; clone() gives workers their own copy over identical weights.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  /// Consumes d(loss)/d(output), accumulates parameter gradients, returns
  /// d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<ParamTensor*> params() { return {}; }
  virtual std::vector<NamedState> state() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override { return {&weight_, &bias_}; }
  std::vector<NamedState> state() override {
    return {{"weight", &weight_.value}, {"bias", &bias_.value}};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string kind() const override { return "conv"; }

 private:
  int in_channels_, out_channels_, kernel_, stride_, pad_;
  ParamTensor weight_;  // {out_c, in_c*k*k}
  ParamTensor bias_;    // {out_c}
  Tensor input_;
};

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override { return {&weight_, &bias_}; }
  std::vector<NamedState> state() override {
    return {{"weight", &weight_.value}, {"bias", &bias_.value}};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  std::string kind() const override { return "linear"; }

 private:
  int in_features_, out_features_;
  ParamTensor weight_;  // {out, in}
  ParamTensor bias_;    // {out}
  Tensor input_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
  std::string kind() const override { return "relu"; }

 private:
  Tensor input_;
};

/// 2x2 max pooling with stride 2.
class MaxPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
  std::string kind() const override { return "maxpool2"; }

 private:
  std::vector<int> in_shape_;
  std::vector<std::int32_t> argmax_;
};

/// Collapses each channel map to its spatial mean: {N,C,H,W} -> {N,C}.
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }
  std::string kind() const override { return "gap"; }

 private:
  std::vector<int> in_shape_;
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
  std::string kind() const override { return "flatten"; }

 private:
  std::vector<int> in_shape_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override { return {&gamma_, &beta_}; }
  std::vector<NamedState> state() override {
    return {{"gamma", &gamma_.value},
            {"beta", &beta_.value},
            {"running_mean", &running_mean_},
            {"running_var", &running_var_}};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
  std::string kind() const override { return "batchnorm"; }

 private:
  int channels_;
  double momentum_, eps_;
  ParamTensor gamma_, beta_;
  Tensor running_mean_, running_var_;
  // caches from the last forward
  bool last_train_ = false;
  Tensor input_, xhat_;
  std::vector<float> inv_std_;
};

/// Multiplies each channel by a 0/1 gate. Identity until a mask is set;
/// this is the pruning hook (zeroing a channel's outgoing activations).
/// Can also accumulate per-channel mean activations for prune ordering.
class ChannelMask final : public Layer {
 public:
  explicit ChannelMask(int channels);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ChannelMask>(*this); }
  std::string kind() const override { return "channel_mask"; }

  int channels() const { return channels_; }
  void set_mask(std::vector<float> mask);
  void reset_mask();

  void start_collecting();
  /// Mean activation per channel over everything forwarded since
  /// start_collecting().
  std::vector<double> finish_collecting();

 private:
  int channels_;
  std::vector<float> mask_;
  bool collecting_ = false;
  std::vector<double> activation_sum_;
  std::int64_t collected_ = 0;
};

/// Pre-activation residual block: BN-ReLU-Conv-BN-ReLU-Conv plus shortcut
/// (1x1 conv on the pre-activation when the shape changes).
class PreActBlock final : public Layer {
 public:
  PreActBlock(int in_channels, int out_channels, int stride, Rng& rng);
  PreActBlock(const PreActBlock& other);
  PreActBlock& operator=(const PreActBlock&) = delete;

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override;
  std::vector<NamedState> state() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<PreActBlock>(*this); }
  std::string kind() const override { return "preact_block"; }

 private:
  bool has_projection_;
  std::unique_ptr<BatchNorm2d> bn1_, bn2_;
  std::unique_ptr<ReLU> relu1_, relu2_;
  std::unique_ptr<Conv2d> conv1_, conv2_, projection_;
  Tensor preact_;  // output of relu1(bn1(x)), feeds both branches
  bool plain_shortcut_from_input_ = false;
};

// Batched softmax / cross-entropy helpers over {N,C} logits.
Tensor softmax_rows(const Tensor& logits);
double mean_cross_entropy(const Tensor& probs, const std::vector<int>& labels);
/// d(mean CE)/d(logits) = (softmax - onehot)/N.
Tensor cross_entropy_logit_grad(const Tensor& probs, const std::vector<int>& labels);

/// Standard normal draw (Box-Muller over the deterministic source).
float normal_sample(Rng& rng);

}  // namespace mtd::nn

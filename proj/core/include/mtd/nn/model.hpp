#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/layers.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

/// Image classifier: a stack of layers ending in logits over C classes.
/// probabilities() rows sum to 1; backward() propagates down to the input
/// pixels, which is what trigger reverse engineering differentiates
/// through. Instances are copyable; workers clone instead of sharing,
/// because forward caches are per-instance.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(const ClassifierModel& other);
  ClassifierModel& operator=(const ClassifierModel& other);
  ClassifierModel(ClassifierModel&&) = default;
  ClassifierModel& operator=(ClassifierModel&&) = default;

  const std::string& arch_id() const { return arch_id_; }
  int class_count() const { return class_count_; }
  const std::array<int, 3>& input_shape() const { return input_shape_; }

  /// Logits for a {N,Ch,H,W} batch. train toggles batch-norm behaviour.
  Tensor forward(const Tensor& batch, bool train);
  /// Softmax probabilities, eval mode.
  Tensor probabilities(const Tensor& batch);
  /// Argmax predictions, eval mode.
  std::vector<int> predict(const std::vector<LabeledImage>& images, int batch_size = 256);
  Tensor probabilities_single(const Tensor& image);  // {Ch,H,W} -> {C}

  /// Backpropagates d(loss)/d(logits); accumulates parameter gradients and
  /// returns d(loss)/d(input batch).
  Tensor backward(const Tensor& grad_logits);
  void zero_grad();

  /// Mean cross-entropy gradient of the batch w.r.t. input pixels, eval
  /// mode (inference-time statistics). Parameter grads are discarded.
  Tensor input_gradient(const Tensor& batch, const std::vector<int>& labels,
                        double* loss_out = nullptr);

  std::vector<nn::ParamTensor*> params();
  std::vector<nn::NamedState> named_state();

  /// The channel-gate hook after the last convolutional block ("features").
  nn::ChannelMask* prune_hook(const std::string& layer_id = "features");

  void save(const std::filesystem::path& path, const std::string& config_digest = {}) const;
  static ClassifierModel load(const std::filesystem::path& path);

  static ClassifierModel make(const std::string& arch_id, int class_count,
                              std::array<int, 3> input_shape, std::uint64_t seed);
  static std::vector<std::string> architectures();

 private:
  std::string arch_id_;
  int class_count_ = 0;
  std::array<int, 3> input_shape_{0, 0, 0};
  std::vector<std::unique_ptr<nn::Layer>> layers_;
  int prune_index_ = -1;

  friend ClassifierModel build_small_cnn(int, std::array<int, 3>, std::uint64_t);
  friend ClassifierModel build_preact_resnet18(int, std::array<int, 3>, std::uint64_t);
};

/// Batched accuracy of argmax predictions against ground-truth labels.
double evaluate_pure_accuracy(ClassifierModel& model,
                              const std::vector<LabeledImage>& test,
                              int batch_size = 256);

Tensor stack_batch(const std::vector<LabeledImage>& images, std::size_t begin,
                   std::size_t end);

}  // namespace mtd

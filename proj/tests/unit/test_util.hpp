#pragma once

#include "mtd/nn/model.hpp"
#include "mtd/rng.hpp"

namespace mtd::testutil {

/// small_cnn with all parameters zeroed except the final bias, so it
/// predicts `winner` with probability ~1 everywhere and has zero input
/// gradient. Handy for forced-prediction contract cases.
inline ClassifierModel constant_model(int class_count, std::array<int, 3> shape,
                                      int winner, float confidence = 30.0f) {
  ClassifierModel model = ClassifierModel::make("small_cnn", class_count, shape, 0);
  const auto params = model.params();
  for (nn::ParamTensor* p : params) p->value.fill(0.0f);
  nn::ParamTensor* final_bias = params.back();
  final_bias->value[static_cast<std::size_t>(winner)] = confidence;
  return model;
}

/// small_cnn with all parameters zero: logits are all equal, softmax is
/// uniform.
inline ClassifierModel uniform_model(int class_count, std::array<int, 3> shape) {
  ClassifierModel model = ClassifierModel::make("small_cnn", class_count, shape, 0);
  for (nn::ParamTensor* p : model.params()) p->value.fill(0.0f);
  return model;
}

inline std::vector<LabeledImage> random_images(int count, int classes, int channels,
                                               int side, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    LabeledImage img;
    img.pixels = Tensor({channels, side, side});
    for (std::size_t k = 0; k < img.pixels.size(); ++k)
      img.pixels[k] = rng.uniform_float();
    img.label = i % classes;
    img.id = i;
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace mtd::testutil

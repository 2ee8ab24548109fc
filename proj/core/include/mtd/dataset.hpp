#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

/// One image in canonical form: pixels {Ch,H,W} as reals in [0,1] and a
/// class label in [0,C). `id` is stable within the source split and is what
/// detection-set disjointness is defined over.
struct LabeledImage {
  Tensor pixels;
  int label = 0;
  std::int64_t id = -1;
};

struct Dataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
  int class_count = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
};

/// Pure images split for the detection pipeline: Data_Trigger feeds trigger
/// reverse engineering, Data_Transfer measures transferability. Disjoint by
/// image id, both drawn from held-out pure data.
struct DetectionSplit {
  std::vector<LabeledImage> data_trigger;
  std::vector<LabeledImage> data_transfer;
  /// Classes with no representative in data_transfer (coverage warning).
  std::vector<int> transfer_missing_classes;
};

/// Loads a dataset by descriptor:
///   "mnist"      IDX files (train-images-idx3-ubyte etc.) under data_root
///   "cifar10"    CIFAR-10 binary batches under data_root
///   "dir:<path>" images plus a CSV manifest "filename,label" at <path>
/// Pixels are scaled to [0,1]. Throws std::runtime_error on unknown
/// descriptors, missing/corrupt files, or out-of-range labels.
Dataset load_dataset(const std::string& descriptor, const std::string& data_root = {});

/// Deterministic disjoint draw of n_trigger + n_transfer images from a pool
/// of pure images. Uniform random by default; stratified mode spreads the
/// trigger set across classes. Throws if the pool is too small or either
/// count is < 1.
DetectionSplit split_detection_sets(const std::vector<LabeledImage>& pure_validation,
                                    int n_trigger, int n_transfer,
                                    std::uint64_t seed, bool stratified = false,
                                    int class_count = 0);

}  // namespace mtd

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/model.hpp"
#include "mtd/poison.hpp"
#include "mtd/rng.hpp"

namespace mtd {

struct StripConfig {
  int n_blends = 32;
  double blend_weight = 0.5;
  double percentile = 0.01;  // pure-tail probability for the threshold
  std::uint64_t seed = 0;
};

/// Mean softmax entropy (bits) of the model over n_blends convex blends
/// (1-w)*x + w*x_p with pure images drawn from the pool. An input carrying
/// a robust trigger keeps a confident (low-entropy) prediction under
/// blending; STRIP flags inputs below the pure-entropy threshold.
double strip_entropy(ClassifierModel& model, const Tensor& image,
                     const std::vector<LabeledImage>& pure_pool, const StripConfig& cfg,
                     Rng& rng);

/// mu + z(percentile)*sigma of the pure entropies under a normal fit;
/// inputs below this are declared Trojan. Zero variance returns mu with a
/// warning.
double strip_threshold(const std::vector<double>& pure_entropies, double percentile);

struct StripResult {
  double threshold = 0.0;
  double fpr = 0.0;  // pure inputs flagged Trojan
  double fnr = 0.0;  // Trojan inputs passed as pure
  std::vector<double> pure_entropies;
  std::vector<double> trojan_entropies;
};

StripResult strip_evaluate(ClassifierModel& model,
                           const std::vector<LabeledImage>& pure_test,
                           const std::vector<LabeledImage>& trojan_test,
                           const StripConfig& cfg);

struct PrunePoint {
  int pruned_count = 0;
  double pure_acc = 0.0;
  double trojan_acc = 0.0;
};

/// Zeroes channels of the named feature layer in ascending order of mean
/// activation over pure_data, recording accuracies every `stride` channels
/// (endpoints always included). The model's mask is restored afterwards.
std::vector<PrunePoint> fine_prune_curve(ClassifierModel& model,
                                         const std::vector<LabeledImage>& pure_data,
                                         const std::string& prune_order_layer,
                                         const std::vector<LabeledImage>& test,
                                         const PoisonSpec& spec, std::uint64_t seed,
                                         int stride = 1);

}  // namespace mtd

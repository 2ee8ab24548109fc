#include "mtd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "mtd/stats.hpp"
#include "mtd/training.hpp"

namespace mtd {

double strip_entropy(ClassifierModel& model, const Tensor& image,
                     const std::vector<LabeledImage>& pure_pool, const StripConfig& cfg,
                     Rng& rng) {
  if (static_cast<int>(pure_pool.size()) < cfg.n_blends)
    throw std::invalid_argument("strip_entropy: pure pool smaller than n_blends");
  if (!(cfg.blend_weight > 0.0 && cfg.blend_weight < 1.0))
    throw std::invalid_argument("strip_entropy: blend_weight must be in (0,1)");

  // Draw n_blends distinct pool indices.
  std::vector<int> indices(pure_pool.size());
  std::iota(indices.begin(), indices.end(), 0);
  for (int k = 0; k < cfg.n_blends; ++k) {
    const int j = k + rng.uniform_int(static_cast<int>(pure_pool.size()) - k);
    std::swap(indices[static_cast<std::size_t>(k)], indices[static_cast<std::size_t>(j)]);
  }

  Tensor batch({cfg.n_blends, image.dim(0), image.dim(1), image.dim(2)});
  const float w = static_cast<float>(cfg.blend_weight);
  for (int k = 0; k < cfg.n_blends; ++k) {
    const Tensor& pure = pure_pool[static_cast<std::size_t>(indices[static_cast<std::size_t>(k)])].pixels;
    float* dst = batch.data() + static_cast<std::size_t>(k) * image.size();
    for (std::size_t i = 0; i < image.size(); ++i)
      dst[i] = (1.0f - w) * image[i] + w * pure[i];
  }

  const Tensor probs = model.probabilities(batch);
  const int classes = probs.dim(1);
  double sum = 0.0;
  for (int k = 0; k < cfg.n_blends; ++k) {
    std::vector<double> row(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c)
      row[static_cast<std::size_t>(c)] =
          probs[static_cast<std::size_t>(k) * classes + c];
    sum += entropy_bits(row);
  }
  return sum / static_cast<double>(cfg.n_blends);
}

double strip_threshold(const std::vector<double>& pure_entropies, double percentile) {
  if (pure_entropies.size() < 2)
    throw std::invalid_argument("strip_threshold: need at least 2 samples");
  const MeanStd ms = mean_std(pure_entropies);
  if (ms.std == 0.0) {
    std::cerr << "[strip] warning: zero variance in pure entropies, threshold = mean\n";
    return ms.mean;
  }
  return ms.mean + normal_quantile(percentile) * ms.std;
}

StripResult strip_evaluate(ClassifierModel& model,
                           const std::vector<LabeledImage>& pure_test,
                           const std::vector<LabeledImage>& trojan_test,
                           const StripConfig& cfg) {
  if (pure_test.empty() || trojan_test.empty())
    throw std::invalid_argument("strip_evaluate: empty input set");

  StripResult out;
  Rng rng(Rng::derive(cfg.seed, 0x57817));
  out.pure_entropies.reserve(pure_test.size());
  for (const LabeledImage& img : pure_test)
    out.pure_entropies.push_back(strip_entropy(model, img.pixels, pure_test, cfg, rng));
  out.trojan_entropies.reserve(trojan_test.size());
  for (const LabeledImage& img : trojan_test)
    out.trojan_entropies.push_back(strip_entropy(model, img.pixels, pure_test, cfg, rng));

  out.threshold = strip_threshold(out.pure_entropies, cfg.percentile);
  std::size_t fp = 0, fn = 0;
  for (double h : out.pure_entropies)
    if (h < out.threshold) ++fp;
  for (double h : out.trojan_entropies)
    if (h >= out.threshold) ++fn;
  out.fpr = static_cast<double>(fp) / static_cast<double>(out.pure_entropies.size());
  out.fnr = static_cast<double>(fn) / static_cast<double>(out.trojan_entropies.size());
  return out;
}

std::vector<PrunePoint> fine_prune_curve(ClassifierModel& model,
                                         const std::vector<LabeledImage>& pure_data,
                                         const std::string& prune_order_layer,
                                         const std::vector<LabeledImage>& test,
                                         const PoisonSpec& spec, std::uint64_t seed,
                                         int stride) {
  nn::ChannelMask* hook = model.prune_hook(prune_order_layer);
  if (pure_data.empty()) throw std::invalid_argument("fine_prune_curve: no pure data");
  if (stride < 1) stride = 1;

  hook->start_collecting();
  for (std::size_t begin = 0; begin < pure_data.size(); begin += 256) {
    const std::size_t end = std::min(pure_data.size(), begin + 256);
    model.forward(stack_batch(pure_data, begin, end), false);
  }
  const std::vector<double> means = hook->finish_collecting();

  std::vector<int> order(means.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return means[static_cast<std::size_t>(a)] <
                                              means[static_cast<std::size_t>(b)]; });

  // Poisoned evaluation sets are fixed across prune steps.
  std::vector<std::vector<LabeledImage>> trojan_sets;
  for (int t : spec.target_classes)
    trojan_sets.push_back(
        build_trojan_testset(test, spec, t, Rng::derive(seed, static_cast<std::uint64_t>(t))));

  const int channels = hook->channels();
  std::vector<PrunePoint> curve;
  for (int pruned = 0; pruned <= channels; pruned += stride) {
    if (pruned > channels) break;
    std::vector<float> mask(static_cast<std::size_t>(channels), 1.0f);
    for (int k = 0; k < pruned; ++k) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 0.0f;
    hook->set_mask(mask);

    PrunePoint point;
    point.pruned_count = pruned;
    point.pure_acc = evaluate_pure_accuracy(model, test);
    double sum = 0.0;
    for (std::size_t i = 0; i < trojan_sets.size(); ++i) {
      const std::vector<int> preds = model.predict(trojan_sets[i]);
      std::size_t hits = 0;
      for (std::size_t k = 0; k < preds.size(); ++k)
        if (preds[k] == spec.target_classes[i]) ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(preds.size());
    }
    point.trojan_acc = trojan_sets.empty() ? 0.0 : sum / static_cast<double>(trojan_sets.size());
    curve.push_back(point);

    if (pruned < channels && pruned + stride > channels) {
      // Make sure the fully-pruned endpoint is always recorded.
      stride = channels - pruned;
    }
  }
  hook->reset_mask();
  return curve;
}

}  // namespace mtd

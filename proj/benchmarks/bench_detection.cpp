#include <benchmark/benchmark.h>

#include "mtd/detection.hpp"
#include "mtd/reveng.hpp"
#include "mtd/rng.hpp"

namespace {

std::vector<mtd::LabeledImage> transfer_set(int count) {
  std::vector<mtd::LabeledImage> out;
  mtd::Rng rng(5);
  for (int i = 0; i < count; ++i) {
    mtd::LabeledImage img;
    img.pixels = mtd::Tensor({1, 28, 28});
    for (std::size_t k = 0; k < img.pixels.size(); ++k)
      img.pixels[k] = rng.uniform_float();
    img.label = i % 10;
    img.id = i;
    out.push_back(std::move(img));
  }
  return out;
}

void BM_RevengStep(benchmark::State& state) {
  // One full reverse-engineering job, capped at a fixed step count.
  mtd::ClassifierModel model =
      mtd::ClassifierModel::make("small_cnn", 10, {1, 28, 28}, 1);
  const auto images = transfer_set(1);
  const mtd::MaskRegion mask = mtd::make_mask(28, 28, "center");
  mtd::RevengSettings opt;
  opt.max_steps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mtd::reverse_engineer_trigger(model, images[0], 3, mask, opt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RevengStep)->Arg(50);

void BM_TransferEntropy(benchmark::State& state) {
  mtd::ClassifierModel model =
      mtd::ClassifierModel::make("small_cnn", 10, {1, 28, 28}, 1);
  const auto transfer = transfer_set(200);
  mtd::ReversedTrigger rt;
  rt.mask = mtd::make_mask(28, 28, "center");
  rt.intended_class = 3;
  rt.optimized_patch = mtd::Tensor::full({1, 7, 7}, 0.7f);
  rt.delta = mtd::Tensor::full({1, 7, 7}, 0.2f);
  mtd::DetectionConfig config;
  config.class_count = 10;
  for (auto _ : state)
    benchmark::DoNotOptimize(mtd::transfer_entropy(model, rt, transfer, config));
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_TransferEntropy);

void BM_EntropyThreshold(benchmark::State& state) {
  double delta = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mtd::entropy_threshold(delta, 43));
    delta = delta < 0.9 ? delta + 1e-9 : 0.1;
  }
}
BENCHMARK(BM_EntropyThreshold);

}  // namespace

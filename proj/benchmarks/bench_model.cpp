#include <benchmark/benchmark.h>

#include "mtd/nn/model.hpp"
#include "mtd/rng.hpp"

namespace {

mtd::Tensor random_batch(int n, int channels, int side, std::uint64_t seed) {
  mtd::Tensor batch({n, channels, side, side});
  mtd::Rng rng(seed);
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform_float();
  return batch;
}

void BM_SmallCnnForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mtd::ClassifierModel model =
      mtd::ClassifierModel::make("small_cnn", 10, {1, 28, 28}, 1);
  const mtd::Tensor batch = random_batch(n, 1, 28, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.probabilities(batch));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SmallCnnForward)->Arg(1)->Arg(128);

void BM_SmallCnnInputGradient(benchmark::State& state) {
  mtd::ClassifierModel model =
      mtd::ClassifierModel::make("small_cnn", 10, {1, 28, 28}, 1);
  const mtd::Tensor batch = random_batch(1, 1, 28, 3);
  const std::vector<int> labels{4};
  for (auto _ : state) benchmark::DoNotOptimize(model.input_gradient(batch, labels));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SmallCnnInputGradient);

void BM_ResnetForward(benchmark::State& state) {
  mtd::ClassifierModel model =
      mtd::ClassifierModel::make("preact_resnet18", 10, {3, 32, 32}, 1);
  const mtd::Tensor batch = random_batch(1, 3, 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model.probabilities(batch));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ResnetForward);

}  // namespace

#include <benchmark/benchmark.h>

#include "mtd/poison.hpp"
#include "mtd/rng.hpp"
#include "mtd/trigger.hpp"

namespace {

mtd::Tensor random_image(int channels, int side, std::uint64_t seed) {
  mtd::Tensor img({channels, side, side});
  mtd::Rng rng(seed);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform_float();
  return img;
}

void BM_Composite(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mtd::Tensor img = random_image(3, side, 1);
  const mtd::Trigger trig = mtd::make_random_trigger(8, 3, 0, 1.0f, 2);
  mtd::Rng rng(3);
  for (auto _ : state) {
    const mtd::Placement place = mtd::sample_placement(side, side, 8, rng);
    benchmark::DoNotOptimize(mtd::composite(img, trig, place));
  }
}
BENCHMARK(BM_Composite)->Arg(32)->Arg(224);

void BM_PoisonBatch(benchmark::State& state) {
  std::vector<mtd::LabeledImage> batch;
  for (int i = 0; i < 128; ++i) {
    mtd::LabeledImage img;
    img.pixels = random_image(3, 32, static_cast<std::uint64_t>(i));
    img.label = i % 10;
    img.id = i;
    batch.push_back(std::move(img));
  }
  mtd::PoisonSpec spec = mtd::build_poison_spec(10, 0.7, 4, 3, 1.0f, 7);
  spec.poison_fraction = 0.1;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(mtd::poison_batch(batch, spec, seed++));
}
BENCHMARK(BM_PoisonBatch);

}  // namespace

BENCHMARK_MAIN();

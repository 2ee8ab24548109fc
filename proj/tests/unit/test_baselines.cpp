#include <doctest.h>

#include <cmath>

#include "mtd/baselines.hpp"
#include "test_util.hpp"

using namespace mtd;
using mtd::testutil::constant_model;
using mtd::testutil::random_images;
using mtd::testutil::uniform_model;

TEST_CASE("strip threshold: normal quantile evaluation and degenerate cases") {
  // mu=3, sigma=0.5, 1% tail: 3 - 2.3263*0.5 = 1.8368
  std::vector<double> entropies;
  for (int i = 0; i < 1000; ++i)
    entropies.push_back(3.0 + 0.5 * ((i % 2 == 0) ? 1.0 : -1.0));
  // that population has mean 3, std 0.5 exactly
  CHECK(strip_threshold(entropies, 0.01) == doctest::Approx(1.8368).epsilon(1e-3));
  CHECK(strip_threshold(entropies, 0.5) == doctest::Approx(3.0).epsilon(1e-9));

  const std::vector<double> constant(10, 2.5);
  CHECK(strip_threshold(constant, 0.01) == 2.5);  // sigma=0 returns the mean
  CHECK_THROWS(strip_threshold({1.0}, 0.01));
}

TEST_CASE("strip entropy: confident model near 0, flat model at log2(C)") {
  const auto pool = random_images(40, 10, 1, 16, 51);
  StripConfig cfg;
  cfg.n_blends = 8;
  Rng rng(1);

  ClassifierModel confident = constant_model(10, {1, 16, 16}, 2);
  const double low = strip_entropy(confident, pool[0].pixels, pool, cfg, rng);
  CHECK(low < 1e-6);

  ClassifierModel flat = uniform_model(10, {1, 16, 16});
  const double high = strip_entropy(flat, pool[0].pixels, pool, cfg, rng);
  CHECK(high == doctest::Approx(std::log2(10.0)).epsilon(1e-5));

  CHECK_THROWS(strip_entropy(flat, pool[0].pixels,
                             std::vector<LabeledImage>(pool.begin(), pool.begin() + 4),
                             cfg, rng));
}

TEST_CASE("strip entropy is deterministic given the rng state") {
  const auto pool = random_images(30, 10, 1, 16, 52);
  StripConfig cfg;
  cfg.n_blends = 8;
  ClassifierModel model = ClassifierModel::make("small_cnn", 10, {1, 16, 16}, 3);
  Rng a(9), b(9);
  CHECK(strip_entropy(model, pool[0].pixels, pool, cfg, a) ==
        strip_entropy(model, pool[0].pixels, pool, cfg, b));
}

TEST_CASE("strip evaluate: confident model flags nothing (FPR 0, FNR 1)") {
  // Every input yields entropy 0, sigma=0 => threshold = 0; nothing is
  // strictly below it, so no input is ever declared Trojan.
  ClassifierModel model = constant_model(10, {1, 16, 16}, 4);
  const auto pure = random_images(12, 10, 1, 16, 53);
  const auto trojan = random_images(12, 10, 1, 16, 54);
  StripConfig cfg;
  cfg.n_blends = 4;
  const StripResult result = strip_evaluate(model, pure, trojan, cfg);
  CHECK(result.fpr == 0.0);
  CHECK(result.fnr == 1.0);
}

TEST_CASE("fine-prune curve endpoints: identity and full collapse") {
  const auto data = random_images(60, 4, 1, 16, 55);
  const PoisonSpec spec = build_poison_spec(4, 0.5, 4, 1, 1.0f, 56);
  ClassifierModel model = ClassifierModel::make("small_cnn", 4, {1, 16, 16}, 57);

  const double base_acc = evaluate_pure_accuracy(model, data);
  const auto curve = fine_prune_curve(model, data, "features", data, spec, 1, 8);
  REQUIRE(!curve.empty());
  CHECK(curve.front().pruned_count == 0);
  CHECK(curve.front().pure_acc == doctest::Approx(base_acc));
  CHECK(curve.back().pruned_count == 32);  // small_cnn feature width

  // with every feature channel zeroed the logits are input independent:
  // one fixed class wins, so accuracy collapses to its class share
  CHECK(curve.back().pure_acc <= 0.5);

  // the mask is restored afterwards
  CHECK(evaluate_pure_accuracy(model, data) == doctest::Approx(base_acc));

  CHECK_THROWS(fine_prune_curve(model, data, "no_such_layer", data, spec, 1, 8));
}

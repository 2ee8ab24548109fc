#include <doctest.h>

#include <cmath>

#include "mtd/rng.hpp"
#include "mtd/stats.hpp"
#include "mtd/trigger.hpp"

using namespace mtd;

namespace {

Tensor random_image(int channels, int height, int width, std::uint64_t seed) {
  Tensor img({channels, height, width});
  Rng rng(seed);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform_float();
  return img;
}

}  // namespace

TEST_CASE("random trigger: range, determinism, distinctness") {
  const Trigger a = make_random_trigger(4, 3, 6, 1.0f, 7);
  CHECK(a.patch.shape() == std::vector<int>{3, 4, 4});
  CHECK(a.alpha.shape() == std::vector<int>{4, 4});
  for (std::size_t i = 0; i < a.patch.size(); ++i) {
    CHECK(a.patch[i] >= 0.0f);
    CHECK(a.patch[i] <= 1.0f);
  }
  const Trigger b = make_random_trigger(4, 3, 6, 1.0f, 7);
  for (std::size_t i = 0; i < a.patch.size(); ++i) CHECK(a.patch[i] == b.patch[i]);

  const Trigger c = make_random_trigger(4, 3, 6, 1.0f, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.patch.size(); ++i)
    if (a.patch[i] != c.patch[i]) any_diff = true;
  CHECK(any_diff);

  const Trigger tiny = make_random_trigger(1, 1, 0, 0.5f, 1);
  CHECK(tiny.patch.size() == 1);
  CHECK_THROWS(make_random_trigger(0, 1, 0, 1.0f, 1));
  CHECK_THROWS(make_random_trigger(4, 1, 0, 1.5f, 1));
}

TEST_CASE("composite alpha=0 is the identity, bit-exact") {
  const Tensor x = random_image(3, 16, 16, 11);
  const Trigger trig = make_random_trigger(4, 3, 1, 0.0f, 3);
  const Tensor out = composite(x, trig, {5, 6});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
}

TEST_CASE("composite alpha=1 pastes the patch, untouched elsewhere, idempotent") {
  const Tensor x = random_image(1, 12, 12, 5);
  const Trigger trig = make_random_trigger(4, 1, 1, 1.0f, 3);
  const Placement place{2, 7};
  const Tensor out = composite(x, trig, place);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const bool inside = i >= 2 && i < 6 && j >= 7 && j < 11;
      if (inside)
        CHECK(out.at(0, i, j) == trig.patch.at(0, i - 2, j - 7));
      else
        CHECK(out.at(0, i, j) == x.at(0, i, j));
    }
  const Tensor twice = composite(out, trig, place);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(twice[i] == out[i]);
}

TEST_CASE("composite alpha=0.5 is the convex combination") {
  Tensor x = Tensor::full({1, 8, 8}, 0.2f);
  Trigger trig = make_random_trigger(4, 1, 0, 0.5f, 1);
  trig.patch.fill(0.6f);
  const Tensor out = composite(x, trig, {2, 2});
  // hand evaluation: 0.5*0.2 + 0.5*0.6 = 0.4
  CHECK(out.at(0, 3, 3) == doctest::Approx(0.4f).epsilon(1e-6));
  CHECK(out.at(0, 0, 0) == 0.2f);
}

TEST_CASE("composites with disjoint windows commute") {
  const Tensor x = random_image(1, 16, 16, 99);
  const Trigger t1 = make_random_trigger(4, 1, 0, 1.0f, 1);
  const Trigger t2 = make_random_trigger(4, 1, 1, 0.7f, 2);
  const Tensor ab = composite(composite(x, t1, {0, 0}), t2, {9, 9});
  const Tensor ba = composite(composite(x, t2, {9, 9}), t1, {0, 0});
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == ba[i]);
}

TEST_CASE("composite rejects out-of-bounds placements") {
  const Tensor x = random_image(1, 8, 8, 1);
  const Trigger trig = make_random_trigger(4, 1, 0, 1.0f, 1);
  CHECK_THROWS(composite(x, trig, {5, 0}));
  CHECK_THROWS(composite(x, trig, {0, 5}));
  CHECK_THROWS(composite(x, trig, {-1, 0}));
}

TEST_CASE("placement: forced case and bounds") {
  Rng rng(0);
  const Placement p = sample_placement(4, 4, 4, rng);
  CHECK(p.row == 0);
  CHECK(p.col == 0);
  for (int k = 0; k < 200; ++k) {
    const Placement q = sample_placement(32, 32, 4, rng);
    CHECK(q.row >= 0);
    CHECK(q.row <= 28);
    CHECK(q.col >= 0);
    CHECK(q.col <= 28);
  }
  CHECK_THROWS(sample_placement(3, 8, 4, rng));
}

TEST_CASE("placement distribution is uniform (chi-square over 1e5 draws)") {
  const int height = 32, width = 32, s = 4;
  const int side = height - s + 1;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(side * side), 0);
  Rng rng(12345);
  for (int k = 0; k < 100000; ++k) {
    const Placement p = sample_placement(height, width, s, rng);
    ++counts[static_cast<std::size_t>(p.row * side + p.col)];
  }
  // df = 840; the 99.9th percentile is ~976, so 1000 is a conservative gate.
  CHECK(chi_square_uniform(counts) < 1000.0);
}

TEST_CASE("trigger serialization round trip") {
  const Trigger a = make_random_trigger(4, 3, 6, 0.8f, 42);
  const auto stem = std::filesystem::temp_directory_path() / "mtd_test_trigger";
  save_trigger(a, stem);
  const Trigger b = load_trigger(stem);
  CHECK(b.target_class == 6);
  CHECK(b.seed == 42);
  CHECK(b.patch.shape() == a.patch.shape());
  for (std::size_t i = 0; i < a.patch.size(); ++i) CHECK(a.patch[i] == b.patch[i]);
  for (std::size_t i = 0; i < a.alpha.size(); ++i) CHECK(a.alpha[i] == b.alpha[i]);
}

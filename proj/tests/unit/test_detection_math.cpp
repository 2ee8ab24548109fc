#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "mtd/detection.hpp"
#include "mtd/stats.hpp"

using namespace mtd;

TEST_CASE("entropy threshold at the paper's settings") {
  // -(1-d)log2(1-d) - d*log2(d/(C-1)) evaluated independently by hand.
  CHECK(entropy_threshold(0.1, 10) == doctest::Approx(0.7859884).epsilon(1e-6));
  CHECK(entropy_threshold(0.1, 43) == doctest::Approx(1.0082290).epsilon(1e-6));
  CHECK(entropy_threshold(1e-9, 10) < 1e-6);  // vanishing miss rate limit
  CHECK_THROWS(entropy_threshold(0.0, 10));
  CHECK_THROWS(entropy_threshold(1.0, 10));
  CHECK_THROWS(entropy_threshold(0.1, 1));
}

TEST_CASE("threshold is monotone increasing in delta below 1-1/C") {
  for (int c : {2, 5, 10, 43}) {
    double prev = 0.0;
    for (double d = 0.005; d < 1.0 - 1.0 / c - 1e-9; d += 0.005) {
      const double t = entropy_threshold(d, c);
      CHECK(t > prev);
      prev = t;
    }
  }
}

namespace {

// Independent oracle: enumerate all splits of the miss mass over the C-1
// non-target classes on an integer grid and compute each entropy directly.
void enumerate_remainders(int bins, int units, std::vector<int>& current,
                          const std::function<void(const std::vector<int>&)>& visit) {
  if (bins == 1) {
    current.push_back(units);
    visit(current);
    current.pop_back();
    return;
  }
  for (int k = 0; k <= units; ++k) {
    current.push_back(k);
    enumerate_remainders(bins - 1, units - k, current, visit);
    current.pop_back();
  }
}

}  // namespace

TEST_CASE("Lemma-style bound: no remainder split exceeds the threshold") {
  const int units = 12;  // grid resolution of the miss-mass split
  for (int c = 2; c <= 10; ++c) {
    for (double delta : {0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3}) {
      const double threshold = entropy_threshold(delta, c);
      double max_seen = 0.0;
      std::vector<int> current;
      enumerate_remainders(c - 1, units, current, [&](const std::vector<int>& split) {
        std::vector<double> probs{1.0 - delta};
        for (int k : split) probs.push_back(delta * k / units);
        const double h = entropy_bits(probs);
        CHECK(h <= threshold + 1e-12);
        max_seen = std::max(max_seen, h);
      });
      // Equality holds exactly at the uniform remainder.
      std::vector<double> uniform{1.0 - delta};
      for (int k = 0; k < c - 1; ++k) uniform.push_back(delta / (c - 1));
      CHECK(entropy_bits(uniform) == doctest::Approx(threshold).epsilon(1e-12));
      CHECK(max_seen <= threshold + 1e-12);
    }
  }
}

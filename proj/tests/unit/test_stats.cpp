#include <doctest.h>

#include <cmath>

#include "mtd/stats.hpp"

using namespace mtd;

TEST_CASE("entropy of counts: one-hot, uniform, mixed") {
  CHECK(entropy_bits(std::vector<std::int64_t>{100, 0, 0, 0}) == 0.0);

  std::vector<std::int64_t> uniform10(10, 7);
  CHECK(entropy_bits(uniform10) == doctest::Approx(std::log2(10.0)).epsilon(1e-12));

  // (90,10,0,...,0)/100 evaluated by hand: 0.9*log2(1/0.9) + 0.1*log2(1/0.1)
  std::vector<std::int64_t> skewed(10, 0);
  skewed[0] = 90;
  skewed[1] = 10;
  CHECK(entropy_bits(skewed) == doctest::Approx(0.4689956).epsilon(1e-6));

  CHECK(entropy_bits(std::vector<std::int64_t>{}) == 0.0);
  CHECK(entropy_bits(std::vector<std::int64_t>{0, 0}) == 0.0);
  CHECK_THROWS(entropy_bits(std::vector<std::int64_t>{3, -1}));
}

TEST_CASE("entropy of probabilities matches count form") {
  const std::vector<double> p{0.9, 0.1};
  const std::vector<std::int64_t> c{90, 10};
  CHECK(entropy_bits(p) == doctest::Approx(entropy_bits(c)).epsilon(1e-12));
}

TEST_CASE("normal quantile against reference values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(normal_quantile(0.01) == doctest::Approx(-2.3263478740).epsilon(1e-7));
  CHECK(normal_quantile(0.99) == doctest::Approx(2.3263478740).epsilon(1e-7));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.9599639845).epsilon(1e-7));
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("mean/std") {
  const MeanStd ms = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5));
  CHECK(ms.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(mean_std({}).mean == 0.0);
}

TEST_CASE("chi-square statistic of a perfectly uniform table is zero") {
  CHECK(chi_square_uniform({5, 5, 5, 5}) == 0.0);
  CHECK(chi_square_uniform({10, 0}) == doctest::Approx(10.0));
}

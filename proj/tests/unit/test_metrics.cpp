#include <doctest.h>

#include "mtd/metrics.hpp"

using namespace mtd;

TEST_CASE("class-wise F1: exact match, misses, hand-evaluated case") {
  const std::set<int> truth{6, 9, 0, 2, 4, 3, 5};
  CHECK(classwise_f1(truth, truth, 10) == 1.0);
  CHECK(classwise_f1({}, truth, 10) == 0.0);
  CHECK(classwise_f1({1, 2}, {2, 3}, 10) == doctest::Approx(0.5));
  CHECK(classwise_f1({}, {}, 10) == 1.0);  // pure model, nothing flagged

  // one miss out of 7: P=1, R=6/7 -> F1=12/13
  std::set<int> six(truth);
  six.erase(6);
  CHECK(classwise_f1(six, truth, 10) == doctest::Approx(12.0 / 13.0));

  CHECK_THROWS(classwise_f1({11}, truth, 10));
}

TEST_CASE("class-wise F1 is invariant under a consistent relabeling") {
  const std::set<int> predicted{1, 2, 5};
  const std::set<int> truth{2, 5, 7};
  // permutation: x -> 9-x
  std::set<int> predicted_p, truth_p;
  for (int c : predicted) predicted_p.insert(9 - c);
  for (int c : truth) truth_p.insert(9 - c);
  CHECK(classwise_f1(predicted, truth, 10) == classwise_f1(predicted_p, truth_p, 10));
}

TEST_CASE("model-level F1") {
  // 1 pure + 2 Trojan per dataset, everything correct
  CHECK(model_f1({{false, false}, {true, true}, {true, true}}) == 1.0);
  // all Trojan models missed
  CHECK(model_f1({{false, true}, {false, true}}) == 0.0);
  // pure flagged, both Trojans caught: P=2/3, R=1 -> 0.8
  CHECK(model_f1({{true, false}, {true, true}, {true, true}}) == doctest::Approx(0.8));
  CHECK_THROWS(model_f1({}));
}

TEST_CASE("delta sweep: nested flags and F1 over a synthetic record table") {
  DetectionResult detection;
  detection.delta = 0.1;
  detection.threshold_bits = entropy_threshold(0.1, 10);
  // class -> min entropy; thresholds for C=10: d=0.01 -> 0.148, 0.05 -> 0.469,
  // 0.1 -> 0.786, 0.15 -> 1.071, 0.2 -> 1.329
  const std::vector<std::pair<int, double>> mins{
      {0, 0.05}, {1, 0.3}, {2, 0.6}, {3, 1.0}, {4, 1.2}, {5, 3.1}};
  for (const auto& [cls, h] : mins) {
    ClassDetection cd;
    cd.min_entropy_bits = h;
    detection.per_class[cls] = cd;
  }

  GroundTruth truth;
  truth.is_trojan_model = true;
  truth.target_classes = {0, 1, 2};

  const std::vector<double> grid{0.01, 0.05, 0.1, 0.15, 0.2};
  const auto rows = delta_sweep(detection, truth, 10, grid);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].flagged == std::set<int>{0});
  CHECK(rows[1].flagged == std::set<int>{0, 1});
  CHECK(rows[2].flagged == std::set<int>{0, 1, 2});
  CHECK(rows[2].class_f1 == 1.0);
  CHECK(rows[3].flagged == std::set<int>{0, 1, 2, 3});
  CHECK(rows[4].flagged == std::set<int>{0, 1, 2, 3, 4});
  CHECK(rows[4].class_f1 == doctest::Approx(0.75));  // P=3/5, R=1
  CHECK(flagged_sets_nested(rows));

  // thresholds strictly increase across the grid
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].threshold_bits > rows[i - 1].threshold_bits);
}

TEST_CASE("nestedness detector notices a violation") {
  DeltaSweepRow a, b;
  a.delta = 0.01;
  a.flagged = {1, 2};
  b.delta = 0.05;
  b.flagged = {2, 3};
  CHECK(!flagged_sets_nested({a, b}));
}

// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs end-to-end against the committed desk-scale digit dataset
// (argv[1] = data root). Always-on checks, never compiled out.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "mtd/baselines.hpp"
#include "mtd/dataset.hpp"
#include "mtd/detection.hpp"
#include "mtd/metrics.hpp"
#include "mtd/nn/model.hpp"
#include "mtd/poison.hpp"
#include "mtd/reveng.hpp"
#include "mtd/robustness.hpp"
#include "mtd/stats.hpp"
#include "mtd/training.hpp"
#include "mtd/trigger.hpp"

using namespace mtd;

namespace {

int g_failures = 0;

#define REQUIRE_C(criterion, cond, msg)                                          \
  do {                                                                           \
    if (!(cond)) {                                                               \
      std::cout << "[FAIL] criterion " << criterion << ": " << msg << "\n";      \
      ++g_failures;                                                              \
      return;                                                                    \
    }                                                                            \
  } while (0)

void pass(int criterion, const std::string& detail) {
  std::cout << "[PASS] criterion " << criterion << ": " << detail << "\n";
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Desk-scale budget shared by every trained model in this suite.
TrainConfig desk_train_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 128;
  tc.lr = 0.1;
  tc.momentum = 0.9;
  tc.weight_decay = 5e-4;
  tc.milestone_fracs = {0.4, 0.6, 0.8};
  tc.seed = seed;
  return tc;
}

constexpr std::uint64_t kSeedTrigger = 2024;
constexpr std::uint64_t kSeedTrainPure = 11;
constexpr std::uint64_t kSeedTrainMtta = 12;
constexpr std::uint64_t kSeedTrainBadnet = 13;
constexpr std::uint64_t kSeedSplit = 21;
constexpr std::uint64_t kSeedEval = 31;

// ------------------------------------------------------------ criterion 1

void criterion1_exact_math() {
  // Threshold bound values evaluated from the formula by hand.
  REQUIRE_C(1, std::abs(entropy_threshold(0.1, 10) - 0.7860) < 1e-3,
            "entropy_threshold(0.1,10) != 0.7860 +- 1e-3");
  REQUIRE_C(1, std::abs(entropy_threshold(0.1, 43) - 1.0082) < 1e-3,
            "entropy_threshold(0.1,43) != 1.0082 +- 1e-3");

  // Class-distribution entropy: one-hot exactly zero, uniform exactly log2 C.
  std::vector<std::int64_t> onehot(10, 0);
  onehot[4] = 180;
  REQUIRE_C(1, entropy_bits(onehot) == 0.0, "one-hot entropy is not exactly 0");
  for (int c : {2, 10, 43}) {
    std::vector<std::int64_t> uniform(static_cast<std::size_t>(c), 20);
    REQUIRE_C(1, std::abs(entropy_bits(uniform) - std::log2(double(c))) < 1e-12,
              "uniform entropy deviates from log2(C)");
  }

  // Compositing identities, bit-exact.
  Rng rng(7);
  Tensor image({1, 12, 12});
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = rng.uniform_float();
  const Trigger opaque = make_random_trigger(4, 1, 0, 1.0f, 5);
  const Trigger invisible = make_random_trigger(4, 1, 0, 0.0f, 5);
  const Placement place{3, 6};
  const Tensor with_invisible = composite(image, invisible, place);
  for (std::size_t i = 0; i < image.size(); ++i)
    REQUIRE_C(1, with_invisible[i] == image[i], "alpha=0 composite is not the identity");
  const Tensor with_opaque = composite(image, opaque, place);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const bool inside = i >= 3 && i < 7 && j >= 6 && j < 10;
      const float expected =
          inside ? opaque.patch.at(0, i - 3, j - 6) : image.at(0, i, j);
      REQUIRE_C(1, with_opaque.at(0, i, j) == expected,
                "alpha=1 composite is not the bit-exact paste");
    }

  // Brute-force bound oracle: every split of the miss mass over C-1 classes
  // on a 10-unit grid stays at or under the threshold.
  for (int c = 2; c <= 10; ++c) {
    for (double delta : {0.01, 0.05, 0.1, 0.2, 0.3}) {
      const double threshold = entropy_threshold(delta, c);
      std::vector<int> split(static_cast<std::size_t>(c - 1), 0);
      const int units = 10;
      // odometer enumeration of all compositions of `units` into c-1 bins
      std::vector<int> idx(static_cast<std::size_t>(units), 0);
      for (;;) {
        std::fill(split.begin(), split.end(), 0);
        for (int u : idx) ++split[static_cast<std::size_t>(u)];
        std::vector<double> probs{1.0 - delta};
        for (int k : split)
          probs.push_back(delta * static_cast<double>(k) / units);
        REQUIRE_C(1, entropy_bits(probs) <= threshold + 1e-12,
                  "a remainder distribution exceeded the bound");
        int pos = units - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == c - 2) --pos;
        if (pos < 0) break;
        const int next = idx[static_cast<std::size_t>(pos)] + 1;
        for (int q = pos; q < units; ++q) idx[static_cast<std::size_t>(q)] = next;
      }
      std::vector<double> uniform{1.0 - delta};
      for (int k = 0; k < c - 1; ++k) uniform.push_back(delta / (c - 1));
      REQUIRE_C(1, std::abs(entropy_bits(uniform) - threshold) < 1e-12,
                "uniform remainder does not attain the bound");
    }
  }
  pass(1, "exact-math suite (threshold values, entropy identities, composite "
          "identities, bound oracle)");
}

// ------------------------------------------------- shared desk-scale state

struct DeskModels {
  Dataset data;
  PoisonSpec mtta_spec;
  ClassifierModel pure;
  ClassifierModel mtta;
  double pure_model_acc = 0.0;
  double mtta_pure_acc = 0.0;
  double mtta_trojan_acc = 0.0;
};

DeskModels train_desk_models(const std::string& data_root) {
  DeskModels m;
  m.data = load_dataset("mnist", data_root);

  m.mtta_spec = build_poison_spec(m.data.class_count, 0.7, 4, m.data.channels, 1.0f,
                                  kSeedTrigger);
  m.mtta_spec.poison_fraction = 0.1;

  Timer t;
  m.pure = ClassifierModel::make("small_cnn", m.data.class_count,
                                 {m.data.channels, m.data.height, m.data.width},
                                 kSeedTrainPure);
  train_classifier(m.pure, m.data.train, desk_train_config(kSeedTrainPure), nullptr);

  m.mtta = ClassifierModel::make("small_cnn", m.data.class_count,
                                 {m.data.channels, m.data.height, m.data.width},
                                 kSeedTrainMtta);
  train_classifier(m.mtta, m.data.train, desk_train_config(kSeedTrainMtta),
                   &m.mtta_spec);

  m.pure_model_acc = evaluate_pure_accuracy(m.pure, m.data.test);
  m.mtta_pure_acc = evaluate_pure_accuracy(m.mtta, m.data.test);
  m.mtta_trojan_acc =
      evaluate_trojan_accuracy(m.mtta, m.data.test, m.mtta_spec, -1, kSeedEval).mean;
  std::cout << "[info] desk models trained in " << t.seconds() << "s: pure model acc "
            << m.pure_model_acc << ", MTTA pure acc " << m.mtta_pure_acc
            << ", MTTA trojan acc " << m.mtta_trojan_acc << "\n";
  return m;
}

// ------------------------------------------------------------ criterion 2

void criterion2_attack(const DeskModels& m) {
  REQUIRE_C(2, m.mtta_spec.target_count() == 7, "expected N=7 target classes");
  REQUIRE_C(2, m.mtta_trojan_acc >= 0.95,
            "Trojan accuracy " << m.mtta_trojan_acc << " below 0.95");
  REQUIRE_C(2, std::abs(m.mtta_pure_acc - m.pure_model_acc) <= 0.025,
            "pure accuracy gap " << std::abs(m.mtta_pure_acc - m.pure_model_acc)
                                 << " exceeds 2.5 points");
  pass(2, "MTTA desk model: trojan acc " + std::to_string(m.mtta_trojan_acc) +
              ", pure gap " + std::to_string(std::abs(m.mtta_pure_acc - m.pure_model_acc)));
}

// ------------------------------------------------------------ criterion 3

struct DetectionArtifacts {
  DetectionResult mtta;
  DetectionResult pure;
  DetectionSplit split;
};

void criterion3_detection(DeskModels& m, DetectionArtifacts& out) {
  Timer t;
  out.split = split_detection_sets(m.data.test, 20, 200, kSeedSplit, false,
                                   m.data.class_count);
  DetectionConfig config;
  config.delta = 0.1;
  config.class_count = m.data.class_count;
  RevengSettings opt;  // Adam lr 0.01, 500 steps, 0.99 x 10 early stop
  const std::vector<MaskRegion> center{make_mask(m.data.height, m.data.width, "center")};

  out.mtta = detect_model(m.mtta, out.split, config, opt, center, 1);
  out.pure = detect_model(m.pure, out.split, config, opt, center, 1);
  const double elapsed = t.seconds();

  const std::set<int> truth(m.mtta_spec.target_classes.begin(),
                            m.mtta_spec.target_classes.end());
  const std::set<int> flagged(out.mtta.target_classes.begin(),
                              out.mtta.target_classes.end());
  const double f1 = classwise_f1(flagged, truth, m.data.class_count);

  std::cout << "[info] detection took " << elapsed << "s; MTTA flagged {";
  for (int c : flagged) std::cout << c << " ";
  std::cout << "} truth {";
  for (int c : truth) std::cout << c << " ";
  std::cout << "} classF1=" << f1 << "; pure model flagged "
            << out.pure.target_classes.size() << " classes\n";

  REQUIRE_C(3, out.mtta.trojan_model, "MTTA model not flagged as Trojan");
  REQUIRE_C(3, f1 >= 0.9, "class F1 " << f1 << " below 0.9");
  REQUIRE_C(3, !out.pure.trojan_model, "pure model falsely flagged as Trojan");
  const double mf1 = model_f1({{out.mtta.trojan_model, true}, {out.pure.trojan_model, false}});
  REQUIRE_C(3, mf1 == 1.0, "model-level F1 " << mf1 << " != 1.0");
  REQUIRE_C(3, elapsed <= 1200.0, "detection exceeded the 20 minute budget");
  pass(3, "MTD flags the planted classes (F1 " + std::to_string(f1) +
              "), pure model passes, in " + std::to_string(elapsed) + "s");
}

// ------------------------------------------------------------ criterion 4

void criterion4_invisibility(DeskModels& m) {
  const double clean = m.pure_model_acc;
  double sum = 0.0;
  for (int target : m.mtta_spec.target_classes) {
    const auto plan = plan_trojan_testset(m.data.test, m.mtta_spec, target,
                                          Rng::derive(kSeedEval, target));
    std::vector<LabeledImage> poisoned;
    poisoned.reserve(plan.size());
    for (const TrojanPlanItem& item : plan) {
      LabeledImage img;
      img.pixels = composite(item.source->pixels, m.mtta_spec.triggers.at(target),
                             item.place);
      img.label = item.source->label;  // ground truth, not the attack label
      img.id = item.source->id;
      poisoned.push_back(std::move(img));
    }
    sum += evaluate_pure_accuracy(m.pure, poisoned);
  }
  const double poisoned_acc = sum / m.mtta_spec.target_count();
  REQUIRE_C(4, std::abs(poisoned_acc - clean) <= 0.005,
            "pure model accuracy moved " << std::abs(poisoned_acc - clean)
                                         << " under MTTA triggers (limit 0.005)");
  pass(4, "pure model on triggered images: " + std::to_string(poisoned_acc) +
              " vs clean " + std::to_string(clean));
}

// ------------------------------------------------------------ criterion 5

void criterion5_strip(DeskModels& m) {
  StripConfig cfg;
  cfg.n_blends = 32;
  cfg.percentile = 0.01;
  cfg.seed = kSeedEval;

  std::vector<LabeledImage> pure = m.data.test;
  Rng rng(Rng::derive(kSeedEval, 0x57));
  rng.shuffle(pure);
  pure.resize(200);

  std::vector<LabeledImage> trojan;
  for (int target : m.mtta_spec.target_classes) {
    auto set = build_trojan_testset(m.data.test, m.mtta_spec, target,
                                    Rng::derive(kSeedEval, target));
    rng.shuffle(set);
    for (int i = 0; i < 29 && i < static_cast<int>(set.size()); ++i)
      trojan.push_back(std::move(set[static_cast<std::size_t>(i)]));
  }

  const StripResult result = strip_evaluate(m.mtta, pure, trojan, cfg);
  std::cout << "[info] STRIP threshold " << result.threshold << " bits, FPR "
            << result.fpr << ", FNR " << result.fnr << "\n";
  REQUIRE_C(5, result.fnr >= 0.5,
            "STRIP FNR " << result.fnr << " below 0.5 (defense would work)");
  pass(5, "STRIP fails as in the study: FNR " + std::to_string(result.fnr) +
              " at FPR " + std::to_string(result.fpr));
}

// ------------------------------------------------------------ criterion 6

void criterion6_fineprune(DeskModels& m) {
  const auto curve = fine_prune_curve(m.mtta, m.data.test, "features", m.data.test,
                                      m.mtta_spec, kSeedEval, 2);
  REQUIRE_C(6, !curve.empty(), "empty pruning curve");
  REQUIRE_C(6, curve.front().pruned_count == 0 && curve.back().pruned_count == 32,
            "curve endpoints missing");
  // Until pure accuracy collapses (below 0.5), the backdoor survives within
  // 10 points of it.
  for (const PrunePoint& p : curve) {
    if (p.pure_acc < 0.5) continue;
    REQUIRE_C(6, p.trojan_acc >= p.pure_acc - 0.10,
              "at pruned=" << p.pruned_count << " trojan acc " << p.trojan_acc
                           << " fell more than 10 points under pure acc " << p.pure_acc);
  }
  pass(6, "fine-pruning never separates trojan from pure accuracy before collapse");
}

// ------------------------------------------------------------ criterion 7

void criterion7_robustness(DeskModels& m) {
  RobustnessGrid grid;
  grid.row_counts = {0, 1, 2, 3, 4};
  const auto rows = robustness_curves(m.mtta, m.data.test, grid, m.mtta_spec, kSeedEval);

  for (const RobustnessRow& r : rows) {
    if (r.rows == 0) {
      REQUIRE_C(7, r.pure_acc == m.mtta_pure_acc,
                "rows=0 pure accuracy does not reproduce the criterion-2 value");
      REQUIRE_C(7, r.trojan_acc == m.mtta_trojan_acc,
                "rows=0 trojan accuracy does not reproduce the criterion-2 value");
    }
    if (r.subject == Subject::trigger) {
      REQUIRE_C(7, r.pure_acc == m.mtta_pure_acc,
                "trigger translation changed pure accuracy (must be bit-identical)");
      if (r.rows <= 2) {  // s/2 for the 4x4 trigger
        REQUIRE_C(7, r.trojan_acc >= 0.5,
                  "trojan acc " << r.trojan_acc << " below 0.5 at trigger shift "
                                << r.rows << " " << to_string(r.direction));
      }
    }
  }
  pass(7, "translation study: zero-shift reproduction, pure-side invariance, "
          "half-trigger attack survival");
}

// ------------------------------------------------------------ criterion 8

void criterion8_delta_sweep(DeskModels& m, const DetectionArtifacts& detection) {
  GroundTruth truth;
  truth.is_trojan_model = true;
  truth.target_classes.insert(m.mtta_spec.target_classes.begin(),
                              m.mtta_spec.target_classes.end());
  const std::vector<double> grid{0.01, 0.05, 0.1, 0.15, 0.2};
  // single cached entropy table: reuses criterion 3's records untouched
  const auto rows = delta_sweep(detection.mtta, truth, m.data.class_count, grid);
  REQUIRE_C(8, rows.size() == grid.size(), "sweep row count mismatch");
  REQUIRE_C(8, flagged_sets_nested(rows), "flagged sets are not nested in delta");
  for (std::size_t i = 1; i < rows.size(); ++i)
    REQUIRE_C(8, rows[i].threshold_bits > rows[i - 1].threshold_bits,
              "threshold not strictly increasing");
  std::string f1s;
  for (const auto& r : rows) f1s += std::to_string(r.class_f1) + " ";
  pass(8, "delta sweep nested flags, class F1 per delta: " + f1s);
}

// ------------------------------------------------------------ criterion 9

void criterion9_badnet(const std::string& data_root) {
  Dataset data = load_dataset("mnist", data_root);
  PoisonSpec spec = build_badnet_spec(
      data.class_count, 0, 4, data.channels, 1.0f,
      {0, data.width - 4}, /*checkerboard=*/true, kSeedTrigger);
  spec.poison_fraction = 0.1;

  ClassifierModel model = ClassifierModel::make(
      "small_cnn", data.class_count, {data.channels, data.height, data.width},
      kSeedTrainBadnet);
  train_classifier(model, data.train, desk_train_config(kSeedTrainBadnet), &spec);
  ClassifierModel eval_model = model;
  const double trojan_acc =
      evaluate_trojan_accuracy(eval_model, data.test, spec, 0, kSeedEval).mean;
  std::cout << "[info] badnet model: trojan acc " << trojan_acc << "\n";
  REQUIRE_C(9, trojan_acc >= 0.9, "badnet attack did not take (trojan acc "
                                      << trojan_acc << ")");

  const DetectionSplit split =
      split_detection_sets(data.test, 10, 200, kSeedSplit, false, data.class_count);
  DetectionConfig config;
  config.delta = 0.1;
  config.class_count = data.class_count;
  RevengSettings opt;
  Timer t;
  const DetectionResult result = detect_model(
      model, split, config, opt, nine_position_masks(data.height, data.width), 1);
  std::cout << "[info] badnet 9-position audit took " << t.seconds() << "s, flagged {";
  for (int c : result.target_classes) std::cout << c << " ";
  std::cout << "}\n";

  REQUIRE_C(9, result.trojan_model, "badnet model not flagged");
  REQUIRE_C(9, result.target_classes == std::vector<int>{0},
            "flagged set is not exactly the planted class");
  pass(9, "single-target audit with the 9-position sweep flags exactly class 0");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: mtd_acceptance <data_root>\n";
    return 2;
  }
  const std::string data_root = argv[1];
  Timer total;

  criterion1_exact_math();

  DeskModels models = train_desk_models(data_root);
  criterion2_attack(models);

  DetectionArtifacts detection;
  criterion3_detection(models, detection);
  criterion4_invisibility(models);
  criterion5_strip(models);
  criterion6_fineprune(models);
  criterion7_robustness(models);
  criterion8_delta_sweep(models, detection);
  criterion9_badnet(data_root);

  std::cout << (g_failures == 0 ? "[PASS]" : "[FAIL]") << " acceptance suite: "
            << (9 - g_failures) << "/9 criteria passed in " << total.seconds() << "s\n";
  return g_failures == 0 ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtd/baselines.hpp"
#include "mtd/detection.hpp"
#include "mtd/metrics.hpp"
#include "mtd/robustness.hpp"
#include "mtd/training.hpp"

namespace mtd {

/// Flat key=value experiment description. Every run archives its resolved
/// form; all randomness flows from the named seeds.
struct ExperimentConfig {
  int schema_version = 1;

  // data
  std::string dataset = "mnist";
  std::string data_root;

  // model + training
  std::string arch = "small_cnn";
  TrainConfig train;
  int eval_every = 1;  // per-epoch eval cadence in the training log

  // attack: "pure", "mtta" or "badnet"
  std::string attack = "mtta";
  double target_ratio = 0.7;
  int trigger_size = 4;
  double trigger_alpha = 1.0;
  double poison_fraction = 0.1;
  int badnet_target = 0;
  std::string badnet_anchor = "top_right";
  bool badnet_checkerboard = true;

  // detection
  double delta = 0.1;
  int n_trigger = 20;
  int n_transfer = 200;
  bool stratified_split = false;
  std::string apply_mode = "replace";
  std::string mask_positions = "center";  // "center" | "grid9"
  RevengSettings reveng;

  // baselines
  int strip_blends = 32;
  double strip_percentile = 0.01;
  int strip_max_inputs = 200;
  int prune_stride = 1;

  // robustness
  int robustness_max_rows = -1;  // default: trigger_size

  // delta sweep grid
  std::vector<double> delta_grid = {0.01, 0.05, 0.1, 0.15, 0.20};

  // seeds
  std::uint64_t seed_split = 1;
  std::uint64_t seed_trigger = 2;
  std::uint64_t seed_train = 3;
  std::uint64_t seed_reveng = 4;
  std::uint64_t seed_eval = 5;

  // run
  std::filesystem::path out_dir;
  int workers = 1;
  bool full_scale = false;

  std::string resolved_text() const;
  std::string digest() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Run directory layout: config/ checkpoints/ poison/ logs/ reveng/
/// detection/ reports/.
struct RunPaths {
  std::filesystem::path root, config, checkpoints, poison, logs, reveng, detection,
      reports;
  static RunPaths at(const std::filesystem::path& root, bool create);
};

struct TrainOutcome {
  double pure_acc = 0.0;
  double trojan_acc = -1.0;  // -1 for pure runs
  std::filesystem::path checkpoint;
};

struct DetectOutcome {
  DetectionResult result;
  double class_f1 = -1.0;  // -1 when no ground truth archive exists
  bool truth_is_trojan = false;
  bool verdict_correct = false;
};

/// poison -> train -> evaluate; writes checkpoint, poison archive, training
/// log and resolved config under out_dir.
TrainOutcome cmd_poison_train(const ExperimentConfig& config);

/// Full MTD audit of the run's checkpoint: detection split, reverse
/// engineering sweep, entropy scoring, report + metrics artifacts.
DetectOutcome cmd_detect(const ExperimentConfig& config,
                         const std::optional<std::filesystem::path>& checkpoint = {});

struct StripOutcome {
  double threshold = 0.0, fpr = 0.0, fnr = 0.0;
};
StripOutcome cmd_strip(const ExperimentConfig& config);

std::vector<PrunePoint> cmd_fineprune(const ExperimentConfig& config);

std::vector<RobustnessRow> cmd_robustness(const ExperimentConfig& config);

std::vector<DeltaSweepRow> cmd_sweep_delta(const ExperimentConfig& config);

/// Consolidates whatever artifacts exist under the run directory into
/// reports/summary.md; missing pieces are listed, an empty run dir is an
/// error.
std::string cmd_report(const std::filesystem::path& run_dir);

}  // namespace mtd

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/model.hpp"
#include "mtd/poison.hpp"

namespace mtd {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Step-decay points as fractions of the epoch budget; the 250-epoch
  /// schedule decays at 100/150/200, i.e. {0.4, 0.6, 0.8}.
  std::vector<double> milestone_fracs = {0.4, 0.6, 0.8};
  double lr_decay = 0.1;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double pure_acc = -1.0;    // -1 when not evaluated
  double trojan_acc = -1.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

/// Optional evaluation wired into the training log, run every `every`
/// epochs and always on the last one.
struct TrainEval {
  const std::vector<LabeledImage>* test = nullptr;
  const PoisonSpec* spec = nullptr;  // enables the trojan_acc column
  std::uint64_t seed = 0;
  int every = 1;
};

/// SGD training loop. When `spec` is non-null every batch passes through
/// poison_batch first (on-the-fly poisoning). Deterministic given
/// config.seed. Throws on non-finite loss.
TrainResult train_classifier(ClassifierModel& model,
                             const std::vector<LabeledImage>& train,
                             const TrainConfig& config, const PoisonSpec* spec,
                             const TrainEval* eval = nullptr);

struct TrojanAccuracy {
  std::map<int, double> per_target;
  double mean = 0.0;
};

/// Attack success rate: over poisoned non-target-class test images, the
/// fraction predicted as the intended target; reported per target and
/// averaged. Pass target < 0 for all targets in the spec.
TrojanAccuracy evaluate_trojan_accuracy(ClassifierModel& model,
                                        const std::vector<LabeledImage>& test,
                                        const PoisonSpec& spec, int target,
                                        std::uint64_t seed);

void write_training_log(const std::filesystem::path& csv_path,
                        const std::vector<EpochLog>& log);

}  // namespace mtd

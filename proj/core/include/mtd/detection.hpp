#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/model.hpp"
#include "mtd/reveng.hpp"

namespace mtd {

/// How a recovered trigger is stamped onto transfer images: paste the
/// optimized patch (replace) or add its delta and clamp (additive).
enum class ApplyMode { replace, additive };

ApplyMode apply_mode_from_string(const std::string& name);
std::string to_string(ApplyMode mode);

struct DetectionConfig {
  double delta = 0.1;  // assumed Trojan miss rate for the threshold bound
  int class_count = 0;
  ApplyMode mode = ApplyMode::replace;
  /// Score the entropy of the mean softmax instead of the hard-label
  /// histogram (off by default; the histogram matches the verdict rule).
  bool softmax_average = false;
};

/// Entropy bound for a Trojan trigger with miss rate delta over C classes:
/// -(1-d)*log2(1-d) - d*log2(d/(C-1)).
double entropy_threshold(double delta, int class_count);
double entropy_threshold(const DetectionConfig& config);

Tensor apply_reversed_trigger(const Tensor& image, const ReversedTrigger& rt,
                              ApplyMode mode);

/// Class-distribution entropy of one recovered trigger over Data_Transfer.
struct EntropyRecord {
  std::int64_t source_image_id = -1;
  int intended_class = -1;
  int mask_row = 0, mask_col = 0;
  bool converged = false;
  double final_loss = 0.0;
  std::vector<std::int64_t> histogram;  // argmax counts over C classes
  std::int64_t skipped = 0;             // transfer images of the intended class
  double entropy_bits = 0.0;
  int dominant_class = -1;
};

/// Stamps the trigger on every transfer image (skipping images whose true
/// class is the intended class), takes argmax predictions, and scores the
/// entropy of the resulting class distribution.
EntropyRecord transfer_entropy(ClassifierModel& model, const ReversedTrigger& rt,
                               const std::vector<LabeledImage>& transfer,
                               const DetectionConfig& config);

struct ClassDetection {
  bool flagged = false;
  double min_entropy_bits = 0.0;
  bool no_triggers = false;  // empty trigger list: not flagged, warned
  std::vector<EntropyRecord> records;
};

/// A class is Trojan if any of its recovered triggers transfers: min
/// entropy <= threshold (inclusive).
ClassDetection detect_class(ClassifierModel& model, int cls,
                            const std::vector<ReversedTrigger>& triggers,
                            const std::vector<LabeledImage>& transfer,
                            const DetectionConfig& config);

struct DetectionResult {
  double threshold_bits = 0.0;
  double delta = 0.0;
  std::map<int, ClassDetection> per_class;
  std::vector<int> target_classes;  // flagged classes
  bool trojan_model = false;
  std::vector<RevengFailure> reveng_failures;
};

/// Algorithm: reverse engineer triggers for every class from Data_Trigger,
/// score each on Data_Transfer, flag classes by the entropy bound, and
/// call the model Trojan if at least one class is flagged.
DetectionResult detect_model(const ClassifierModel& model, const DetectionSplit& split,
                             const DetectionConfig& config, const RevengSettings& opt,
                             const std::vector<MaskRegion>& masks, int workers,
                             const std::optional<std::filesystem::path>& reveng_dir = {});

/// Scores an existing sweep (reuse path for delta sweeps and audits).
DetectionResult score_sweep(const ClassifierModel& model, const SweepResult& sweep,
                            const std::vector<LabeledImage>& transfer,
                            const DetectionConfig& config, int workers);

/// Recomputes flags from stored records under a different delta; entropy
/// records are not recomputed.
DetectionResult rethreshold(const DetectionResult& result, double delta, int class_count);

/// report.json + records.csv + one entropy histogram SVG per class.
void write_detection_report(const DetectionResult& result,
                            const std::filesystem::path& dir, int class_count);
DetectionResult load_detection_report(const std::filesystem::path& dir);

}  // namespace mtd

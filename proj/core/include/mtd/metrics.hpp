#pragma once

#include <set>
#include <vector>

#include "mtd/detection.hpp"

namespace mtd {

struct GroundTruth {
  bool is_trojan_model = false;
  std::set<int> target_classes;  // empty for pure models
};

/// Binary F1 over per-class Trojan labels (predicted vs true target sets).
/// Both sets empty (pure model, nothing flagged) counts as 1.0.
double classwise_f1(const std::set<int>& predicted, const std::set<int>& truth,
                    int class_count);

/// Binary F1 over model-level verdicts (predicted, truth) pairs.
double model_f1(const std::vector<std::pair<bool, bool>>& verdicts);

struct DeltaSweepRow {
  double delta = 0.0;
  double threshold_bits = 0.0;
  std::set<int> flagged;
  double class_f1 = 0.0;
  bool trojan_model = false;
};

/// Re-thresholds one detection result across a delta grid. The entropy
/// records are computed once (by the detect run that produced `result`);
/// only the Lemma-style bound moves.
std::vector<DeltaSweepRow> delta_sweep(const DetectionResult& result,
                                       const GroundTruth& truth, int class_count,
                                       const std::vector<double>& deltas);

/// Flagged sets are nested as delta grows (threshold monotonicity over
/// fixed records); false indicates a violated expectation.
bool flagged_sets_nested(const std::vector<DeltaSweepRow>& rows);

}  // namespace mtd

#include "mtd/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace mtd {

double classwise_f1(const std::set<int>& predicted, const std::set<int>& truth,
                    int class_count) {
  for (int c : predicted)
    if (c < 0 || c >= class_count)
      throw std::invalid_argument("classwise_f1: predicted class out of range");
  for (int c : truth)
    if (c < 0 || c >= class_count)
      throw std::invalid_argument("classwise_f1: truth class out of range");

  if (predicted.empty() && truth.empty()) return 1.0;
  std::size_t tp = 0;
  for (int c : predicted)
    if (truth.count(c)) ++tp;
  const std::size_t fp = predicted.size() - tp;
  const std::size_t fn = truth.size() - tp;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double model_f1(const std::vector<std::pair<bool, bool>>& verdicts) {
  if (verdicts.empty()) throw std::invalid_argument("model_f1: no verdicts");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [predicted, truth] : verdicts) {
    if (predicted && truth) ++tp;
    else if (predicted && !truth) ++fp;
    else if (!predicted && truth) ++fn;
  }
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<DeltaSweepRow> delta_sweep(const DetectionResult& result,
                                       const GroundTruth& truth, int class_count,
                                       const std::vector<double>& deltas) {
  std::vector<DeltaSweepRow> rows;
  for (double d : deltas) {
    const DetectionResult at = rethreshold(result, d, class_count);
    DeltaSweepRow row;
    row.delta = d;
    row.threshold_bits = at.threshold_bits;
    row.flagged.insert(at.target_classes.begin(), at.target_classes.end());
    row.class_f1 = classwise_f1(row.flagged, truth.target_classes, class_count);
    row.trojan_model = at.trojan_model;
    rows.push_back(std::move(row));
  }
  return rows;
}

bool flagged_sets_nested(const std::vector<DeltaSweepRow>& rows) {
  std::vector<DeltaSweepRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const DeltaSweepRow& a, const DeltaSweepRow& b) { return a.delta < b.delta; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!std::includes(sorted[i].flagged.begin(), sorted[i].flagged.end(),
                       sorted[i - 1].flagged.begin(), sorted[i - 1].flagged.end()))
      return false;
  return true;
}

}  // namespace mtd

#include "mtd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtd/io_util.hpp"
#include "mtd/stats.hpp"
#include "mtd/svg_plot.hpp"
#include "mtd/thread_pool.hpp"

namespace mtd {

ApplyMode apply_mode_from_string(const std::string& name) {
  if (name == "replace") return ApplyMode::replace;
  if (name == "additive") return ApplyMode::additive;
  throw std::invalid_argument("unknown apply mode: " + name);
}

std::string to_string(ApplyMode mode) {
  return mode == ApplyMode::replace ? "replace" : "additive";
}

double entropy_threshold(double delta, int class_count) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("entropy_threshold: delta must be in (0,1)");
  if (class_count < 2) throw std::invalid_argument("entropy_threshold: need C >= 2");
  return -(1.0 - delta) * std::log2(1.0 - delta) -
         delta * std::log2(delta / static_cast<double>(class_count - 1));
}

double entropy_threshold(const DetectionConfig& config) {
  return entropy_threshold(config.delta, config.class_count);
}

Tensor apply_reversed_trigger(const Tensor& image, const ReversedTrigger& rt,
                              ApplyMode mode) {
  const MaskRegion& m = rt.mask;
  if (image.rank() != 3 || image.dim(0) != rt.optimized_patch.dim(0) ||
      m.row + m.height > image.dim(1) || m.col + m.width > image.dim(2))
    throw std::invalid_argument("apply_reversed_trigger: shape mismatch");

  Tensor out = image;
  const int channels = image.dim(0);
  std::size_t k = 0;
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < m.height; ++i)
      for (int j = 0; j < m.width; ++j, ++k) {
        float v = mode == ApplyMode::replace
                      ? rt.optimized_patch[k]
                      : image.at(c, m.row + i, m.col + j) + rt.delta[k];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.at(c, m.row + i, m.col + j) = v;
      }
  return out;
}

EntropyRecord transfer_entropy(ClassifierModel& model, const ReversedTrigger& rt,
                               const std::vector<LabeledImage>& transfer,
                               const DetectionConfig& config) {
  if (transfer.empty()) throw std::invalid_argument("transfer_entropy: empty transfer set");

  EntropyRecord rec;
  rec.source_image_id = rt.source_image_id;
  rec.intended_class = rt.intended_class;
  rec.mask_row = rt.mask.row;
  rec.mask_col = rt.mask.col;
  rec.converged = rt.converged;
  rec.final_loss = rt.final_loss;
  rec.histogram.assign(static_cast<std::size_t>(config.class_count), 0);

  std::vector<LabeledImage> stamped;
  stamped.reserve(transfer.size());
  for (const LabeledImage& img : transfer) {
    if (img.label == rt.intended_class) {
      ++rec.skipped;
      continue;
    }
    LabeledImage s;
    s.pixels = apply_reversed_trigger(img.pixels, rt, config.mode);
    s.label = img.label;
    s.id = img.id;
    stamped.push_back(std::move(s));
  }

  if (config.softmax_average) {
    std::vector<double> mean_probs(static_cast<std::size_t>(config.class_count), 0.0);
    for (std::size_t begin = 0; begin < stamped.size(); begin += 256) {
      const std::size_t end = std::min(stamped.size(), begin + 256);
      const Tensor probs = model.probabilities(stack_batch(stamped, begin, end));
      for (std::size_t i = 0; i < end - begin; ++i)
        for (int c = 0; c < config.class_count; ++c)
          mean_probs[static_cast<std::size_t>(c)] +=
              probs[i * static_cast<std::size_t>(config.class_count) + c];
    }
    for (double& p : mean_probs) p /= static_cast<double>(stamped.size());
    rec.entropy_bits = entropy_bits(mean_probs);
    rec.dominant_class = static_cast<int>(
        std::max_element(mean_probs.begin(), mean_probs.end()) - mean_probs.begin());
    // Histogram still reported for the record CSV.
    const std::vector<int> preds = model.predict(stamped);
    for (int p : preds) ++rec.histogram[static_cast<std::size_t>(p)];
    return rec;
  }

  const std::vector<int> preds = model.predict(stamped);
  for (int p : preds) ++rec.histogram[static_cast<std::size_t>(p)];
  rec.entropy_bits = entropy_bits(rec.histogram);
  rec.dominant_class = static_cast<int>(
      std::max_element(rec.histogram.begin(), rec.histogram.end()) - rec.histogram.begin());
  return rec;
}

ClassDetection detect_class(ClassifierModel& model, int cls,
                            const std::vector<ReversedTrigger>& triggers,
                            const std::vector<LabeledImage>& transfer,
                            const DetectionConfig& config) {
  ClassDetection out;
  if (triggers.empty()) {
    out.no_triggers = true;
    out.min_entropy_bits = std::log2(static_cast<double>(config.class_count));
    std::cerr << "[detect] warning: no recovered triggers for class " << cls << "\n";
    return out;
  }
  const double threshold = entropy_threshold(config);
  out.min_entropy_bits = std::numeric_limits<double>::infinity();
  for (const ReversedTrigger& rt : triggers) {
    if (rt.intended_class != cls)
      throw std::invalid_argument("detect_class: trigger for a different class");
    EntropyRecord rec = transfer_entropy(model, rt, transfer, config);
    out.min_entropy_bits = std::min(out.min_entropy_bits, rec.entropy_bits);
    out.records.push_back(std::move(rec));
  }
  out.flagged = out.min_entropy_bits <= threshold;
  return out;
}

DetectionResult score_sweep(const ClassifierModel& model, const SweepResult& sweep,
                            const std::vector<LabeledImage>& transfer,
                            const DetectionConfig& config, int workers) {
  DetectionResult result;
  result.delta = config.delta;
  result.threshold_bits = entropy_threshold(config);
  result.reveng_failures = sweep.failures;

  // Score every trigger in parallel over per-worker model clones, then
  // reduce per class in deterministic job order.
  std::vector<EntropyRecord> records(sweep.triggers.size());
  std::vector<ClassifierModel> clones(worker_count(sweep.triggers.size(), workers), model);
  parallel_for(sweep.triggers.size(), workers, [&](std::size_t worker, std::size_t i) {
    records[i] = transfer_entropy(clones[worker], sweep.triggers[i], transfer, config);
  });

  for (EntropyRecord& rec : records) {
    ClassDetection& cd = result.per_class[rec.intended_class];
    cd.records.push_back(std::move(rec));
  }
  for (auto& [cls, cd] : result.per_class) {
    cd.min_entropy_bits = std::numeric_limits<double>::infinity();
    for (const EntropyRecord& rec : cd.records)
      cd.min_entropy_bits = std::min(cd.min_entropy_bits, rec.entropy_bits);
    cd.flagged = cd.min_entropy_bits <= result.threshold_bits;
    if (cd.flagged) result.target_classes.push_back(cls);
  }
  result.trojan_model = !result.target_classes.empty();
  return result;
}

DetectionResult detect_model(const ClassifierModel& model, const DetectionSplit& split,
                             const DetectionConfig& config, const RevengSettings& opt,
                             const std::vector<MaskRegion>& masks, int workers,
                             const std::optional<std::filesystem::path>& reveng_dir) {
  if (split.data_trigger.empty() || split.data_transfer.empty())
    throw std::invalid_argument("detect_model: empty detection split");

  std::vector<int> classes(static_cast<std::size_t>(config.class_count));
  for (int c = 0; c < config.class_count; ++c) classes[static_cast<std::size_t>(c)] = c;

  const SweepResult sweep =
      reverse_engineer_sweep(model, split, classes, masks, opt, workers, reveng_dir);
  DetectionResult result = score_sweep(model, sweep, split.data_transfer, config, workers);

  // Classes that lost every job to failures still get a (warned) entry.
  for (int c : classes) {
    if (result.per_class.find(c) == result.per_class.end()) {
      ClassDetection cd;
      cd.no_triggers = true;
      cd.min_entropy_bits = std::log2(static_cast<double>(config.class_count));
      std::cerr << "[detect] warning: no recovered triggers for class " << c << "\n";
      result.per_class.emplace(c, std::move(cd));
    }
  }
  return result;
}

DetectionResult rethreshold(const DetectionResult& result, double delta, int class_count) {
  DetectionResult out = result;
  out.delta = delta;
  out.threshold_bits = entropy_threshold(delta, class_count);
  out.target_classes.clear();
  for (auto& [cls, cd] : out.per_class) {
    cd.flagged = !cd.no_triggers && cd.min_entropy_bits <= out.threshold_bits;
    if (cd.flagged) out.target_classes.push_back(cls);
  }
  out.trojan_model = !out.target_classes.empty();
  return out;
}

void write_detection_report(const DetectionResult& result,
                            const std::filesystem::path& dir, int class_count) {
  std::filesystem::create_directories(dir);

  nlohmann::json report;
  report["delta"] = result.delta;
  report["threshold_bits"] = result.threshold_bits;
  report["class_count"] = class_count;
  report["trojan_model"] = result.trojan_model;
  report["target_classes"] = result.target_classes;
  report["reveng_failures"] = result.reveng_failures.size();
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& [cls, cd] : result.per_class) {
    classes.push_back({{"class", cls},
                       {"flagged", cd.flagged},
                       {"min_entropy_bits", cd.min_entropy_bits},
                       {"records", cd.records.size()},
                       {"no_triggers", cd.no_triggers}});
  }
  report["classes"] = classes;
  write_text_file(dir / "report.json", report.dump(2) + "\n");

  std::ofstream csv(dir / "records.csv");
  csv << "class,source_image_id,mask_row,mask_col,converged,final_loss,"
         "entropy_bits,dominant_class,skipped\n";
  for (const auto& [cls, cd] : result.per_class) {
    for (const EntropyRecord& rec : cd.records) {
      csv << cls << "," << rec.source_image_id << "," << rec.mask_row << ","
          << rec.mask_col << "," << (rec.converged ? 1 : 0) << "," << rec.final_loss
          << "," << rec.entropy_bits << "," << rec.dominant_class << "," << rec.skipped
          << "\n";
    }
  }

  for (const auto& [cls, cd] : result.per_class) {
    if (cd.records.empty()) continue;
    std::vector<double> entropies;
    for (const EntropyRecord& rec : cd.records) entropies.push_back(rec.entropy_bits);
    Histogram plot;
    plot.title = "class " + std::to_string(cls) + " trigger entropies (bits)";
    plot.values = entropies;
    plot.bins = 24;
    plot.min_x = 0.0;
    plot.max_x = std::log2(static_cast<double>(class_count));
    plot.vline = result.threshold_bits;
    write_histogram_svg(plot, dir / ("entropy_class_" + std::to_string(cls) + ".svg"));
  }
}

DetectionResult load_detection_report(const std::filesystem::path& dir) {
  const auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  DetectionResult result;
  result.delta = report.at("delta").get<double>();
  result.threshold_bits = report.at("threshold_bits").get<double>();
  result.trojan_model = report.at("trojan_model").get<bool>();
  result.target_classes = report.at("target_classes").get<std::vector<int>>();
  for (const auto& entry : report.at("classes")) {
    ClassDetection cd;
    cd.flagged = entry.at("flagged").get<bool>();
    cd.min_entropy_bits = entry.at("min_entropy_bits").get<double>();
    cd.no_triggers = entry.at("no_triggers").get<bool>();
    result.per_class.emplace(entry.at("class").get<int>(), std::move(cd));
  }

  // Per-record rows come back from records.csv.
  std::ifstream csv(dir / "records.csv");
  if (csv) {
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string field;
      EntropyRecord rec;
      int cls;
      std::getline(ss, field, ','); cls = std::stoi(field);
      std::getline(ss, field, ','); rec.source_image_id = std::stoll(field);
      std::getline(ss, field, ','); rec.mask_row = std::stoi(field);
      std::getline(ss, field, ','); rec.mask_col = std::stoi(field);
      std::getline(ss, field, ','); rec.converged = field == "1";
      std::getline(ss, field, ','); rec.final_loss = std::stod(field);
      std::getline(ss, field, ','); rec.entropy_bits = std::stod(field);
      std::getline(ss, field, ','); rec.dominant_class = std::stoi(field);
      std::getline(ss, field, ','); rec.skipped = std::stoll(field);
      rec.intended_class = cls;
      result.per_class[cls].records.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace mtd

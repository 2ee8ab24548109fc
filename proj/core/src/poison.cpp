#include "mtd/poison.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mtd/io_util.hpp"

namespace mtd {

PoisonSpec build_poison_spec(int class_count, double target_ratio, int trigger_size,
                             int channels, float alpha, std::uint64_t seed) {
  if (class_count < 2) throw std::invalid_argument("build_poison_spec: need C >= 2");
  if (!(target_ratio > 0.0 && target_ratio < 1.0))
    throw std::invalid_argument("build_poison_spec: target_ratio must be in (0,1)");

  // Round to nearest, ties to even: 70:30 at C=10 gives N=7, at C=43 gives
  // N=30, and a 0.05 ratio at C=10 rounds down to N=0 (rejected below).
  const int n_targets = static_cast<int>(std::nearbyint(target_ratio * class_count));
  if (n_targets < 1 || n_targets >= class_count)
    throw std::invalid_argument("build_poison_spec: target_ratio yields N=" +
                                std::to_string(n_targets) + " for C=" +
                                std::to_string(class_count));

  PoisonSpec spec;
  spec.target_ratio = target_ratio;

  std::vector<int> classes(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) classes[static_cast<std::size_t>(c)] = c;
  Rng rng(seed);
  rng.shuffle(classes);
  spec.target_classes.assign(classes.begin(), classes.begin() + n_targets);

  for (int t : spec.target_classes) {
    const std::uint64_t trig_seed = Rng::derive(seed, static_cast<std::uint64_t>(t));
    spec.triggers.emplace(t, make_random_trigger(trigger_size, channels, t, alpha, trig_seed));
  }
  return spec;
}

PoisonSpec build_badnet_spec(int class_count, int target_class, int trigger_size,
                             int channels, float alpha, Placement place,
                             bool checkerboard, std::uint64_t seed) {
  if (target_class < 0 || target_class >= class_count)
    throw std::invalid_argument("build_badnet_spec: target class out of range");
  PoisonSpec spec;
  spec.target_ratio = 1.0 / class_count;
  spec.target_classes = {target_class};
  spec.fixed_placement = place;
  Trigger trig = checkerboard
                     ? make_checkerboard_trigger(trigger_size, channels, target_class, alpha)
                     : make_random_trigger(trigger_size, channels, target_class, alpha,
                                           Rng::derive(seed, 0));
  spec.triggers.emplace(target_class, std::move(trig));
  return spec;
}

LabeledImage poison_sample(const LabeledImage& img, const PoisonSpec& spec,
                           int target, std::uint64_t seed) {
  const auto it = spec.triggers.find(target);
  if (it == spec.triggers.end())
    throw std::invalid_argument("poison_sample: class " + std::to_string(target) +
                                " is not a target of this spec");
  const Trigger& trig = it->second;
  Placement place;
  if (spec.fixed_placement) {
    place = *spec.fixed_placement;
  } else {
    Rng rng(seed);
    place = sample_placement(img.pixels.dim(1), img.pixels.dim(2), trig.size(), rng);
  }
  LabeledImage out;
  out.pixels = composite(img.pixels, trig, place);
  out.label = target;
  out.id = img.id;
  return out;
}

std::vector<LabeledImage> poison_batch(const std::vector<LabeledImage>& batch,
                                       const PoisonSpec& spec, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("poison_batch: empty batch");
  std::vector<LabeledImage> out = batch;
  if (spec.empty()) return out;

  const int quota = static_cast<int>(std::floor(spec.poison_fraction *
                                                static_cast<double>(batch.size())));
  if (quota <= 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const int batch_target =
      spec.target_classes[static_cast<std::size_t>(rng.uniform_int(spec.target_count()))];
  for (int k = 0; k < quota; ++k) {
    const std::size_t idx = order[static_cast<std::size_t>(k)];
    const int target =
        spec.target_draw == TargetDraw::per_batch
            ? batch_target
            : spec.target_classes[static_cast<std::size_t>(
                  rng.uniform_int(spec.target_count()))];
    if (batch[idx].label == target) continue;  // label no-op, skip
    out[idx] = poison_sample(batch[idx], spec, target, rng.next_u64());
  }
  return out;
}

std::vector<TrojanPlanItem> plan_trojan_testset(const std::vector<LabeledImage>& test,
                                                const PoisonSpec& spec, int target,
                                                std::uint64_t seed) {
  const auto it = spec.triggers.find(target);
  if (it == spec.triggers.end())
    throw std::invalid_argument("build_trojan_testset: class " + std::to_string(target) +
                                " is not a target of this spec");
  const int s = it->second.size();
  Rng rng(seed);
  std::vector<TrojanPlanItem> plan;
  plan.reserve(test.size());
  for (const LabeledImage& img : test) {
    if (img.label == target) continue;
    TrojanPlanItem item;
    item.source = &img;
    const std::uint64_t sample_seed = rng.next_u64();
    if (spec.fixed_placement) {
      item.place = *spec.fixed_placement;
    } else {
      Rng sample_rng(sample_seed);
      item.place = sample_placement(img.pixels.dim(1), img.pixels.dim(2), s, sample_rng);
    }
    plan.push_back(item);
  }
  if (plan.empty())
    throw std::runtime_error("build_trojan_testset: all test images belong to the target class");
  return plan;
}

std::vector<LabeledImage> build_trojan_testset(const std::vector<LabeledImage>& test,
                                               const PoisonSpec& spec, int target,
                                               std::uint64_t seed) {
  const auto plan = plan_trojan_testset(test, spec, target, seed);
  const Trigger& trig = spec.triggers.at(target);
  std::vector<LabeledImage> out;
  out.reserve(plan.size());
  for (const TrojanPlanItem& item : plan) {
    LabeledImage poisoned;
    poisoned.pixels = composite(item.source->pixels, trig, item.place);
    poisoned.label = target;
    poisoned.id = item.source->id;
    out.push_back(std::move(poisoned));
  }
  return out;
}

void save_poison_spec(const PoisonSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["target_classes"] = spec.target_classes;
  meta["poison_fraction"] = spec.poison_fraction;
  meta["target_ratio"] = spec.target_ratio;
  if (spec.fixed_placement) {
    meta["fixed_placement"] = {{"row", spec.fixed_placement->row},
                               {"col", spec.fixed_placement->col}};
  }
  write_text_file(dir / "spec.json", meta.dump(2) + "\n");
  for (const auto& [cls, trig] : spec.triggers)
    save_trigger(trig, dir / ("trigger_" + std::to_string(cls)));
}

PoisonSpec load_poison_spec(const std::filesystem::path& dir) {
  const auto meta = nlohmann::json::parse(read_text_file(dir / "spec.json"));
  PoisonSpec spec;
  spec.target_classes = meta.at("target_classes").get<std::vector<int>>();
  spec.poison_fraction = meta.at("poison_fraction").get<double>();
  spec.target_ratio = meta.value("target_ratio", 0.0);
  if (meta.contains("fixed_placement")) {
    spec.fixed_placement = Placement{meta["fixed_placement"]["row"].get<int>(),
                                     meta["fixed_placement"]["col"].get<int>()};
  }
  for (int cls : spec.target_classes)
    spec.triggers.emplace(cls, load_trigger(dir / ("trigger_" + std::to_string(cls))));
  return spec;
}

}  // namespace mtd

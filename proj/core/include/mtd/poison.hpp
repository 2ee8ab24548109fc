#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/trigger.hpp"

namespace mtd {

/// How the per-poisoned-sample target class is drawn. per_sample spreads
/// every batch's quota uniformly over all targets; per_batch draws one
/// target per batch (uniform across batches), which concentrates the
/// gradient signal of each backdoor rule. Marginal target frequencies are
/// uniform either way.
enum class TargetDraw { per_sample, per_batch };

/// Full attack description: which classes are targets, the class-specific
/// trigger for each, and how much of every training batch gets poisoned.
/// `fixed_placement` empty means trigger-anywhere (the MTTA setting); a
/// value pins every composite to one offset (Badnet-style).
struct PoisonSpec {
  std::vector<int> target_classes;
  std::map<int, Trigger> triggers;
  double poison_fraction = 0.1;
  double target_ratio = 0.0;
  std::optional<Placement> fixed_placement;
  TargetDraw target_draw = TargetDraw::per_sample;

  bool empty() const { return target_classes.empty(); }
  int target_count() const { return static_cast<int>(target_classes.size()); }
};

/// Draws round(target_ratio*C) distinct target classes (round half up) and
/// one random trigger per target, all deterministic given seed. Throws if
/// rounding yields N=0 or N=C.
PoisonSpec build_poison_spec(int class_count, double target_ratio, int trigger_size,
                             int channels, float alpha, std::uint64_t seed);

/// Single-target fixed-placement variant (Badnet). checkerboard=false uses
/// a random trigger.
PoisonSpec build_badnet_spec(int class_count, int target_class, int trigger_size,
                             int channels, float alpha, Placement place,
                             bool checkerboard, std::uint64_t seed);

/// Composites the target's trigger onto the image (placement sampled fresh
/// unless the spec pins it) and rewrites the label to the target class.
LabeledImage poison_sample(const LabeledImage& img, const PoisonSpec& spec,
                           int target, std::uint64_t seed);

/// Replaces floor(poison_fraction*|batch|) randomly chosen samples with
/// poisoned versions; the per-sample target is drawn uniformly over the
/// spec's target classes. Samples whose true label equals the drawn target
/// are skipped (a label no-op is not a poisoning). Pure samples pass
/// through bit-exact.
std::vector<LabeledImage> poison_batch(const std::vector<LabeledImage>& batch,
                                       const PoisonSpec& spec, std::uint64_t seed);

/// Trojan test set for one target: every test image whose true label is not
/// the target, poisoned toward it. Throws if that leaves nothing.
std::vector<LabeledImage> build_trojan_testset(const std::vector<LabeledImage>& test,
                                               const PoisonSpec& spec, int target,
                                               std::uint64_t seed);

/// The sampling behind build_trojan_testset without the compositing: which
/// source images get poisoned and where the trigger lands. Lets the
/// translation study perturb the trigger while keeping placements identical
/// to the untranslated evaluation.
struct TrojanPlanItem {
  const LabeledImage* source = nullptr;
  Placement place;
};
std::vector<TrojanPlanItem> plan_trojan_testset(const std::vector<LabeledImage>& test,
                                                const PoisonSpec& spec, int target,
                                                std::uint64_t seed);

/// Archives the spec as spec.json plus one trigger tensor file per target
/// under `dir`, so audits can verify ground truth later.
void save_poison_spec(const PoisonSpec& spec, const std::filesystem::path& dir);
PoisonSpec load_poison_spec(const std::filesystem::path& dir);

}  // namespace mtd

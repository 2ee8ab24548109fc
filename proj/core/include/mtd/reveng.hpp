#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/model.hpp"

namespace mtd {

/// Rectangular active region for trigger reverse engineering: the binary
/// mask is 1 on an (H/4)x(W/4) window and 0 elsewhere, broadcast over
/// channels.
struct MaskRegion {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

/// Named anchors: "center", corners ("top_left", "top_right", "bottom_left",
/// "bottom_right") and edge midpoints ("top", "bottom", "left", "right").
MaskRegion make_mask(int image_height, int image_width, const std::string& anchor);
/// Explicit offsets; throws if the region leaves the image.
MaskRegion make_mask_at(int image_height, int image_width, int row, int col);
/// The 9-position audit sweep: mask centers on the 3x3 grid at 1/4, 1/2,
/// 3/4 of each image dimension (quadrant centers, quadrant intersections,
/// middle).
std::vector<MaskRegion> nine_position_masks(int image_height, int image_width);

struct RevengSettings {
  double lr = 0.01;          // Adam, constant
  int max_steps = 500;
  double success_prob = 0.99;
  int stable_steps = 10;
};

/// A recovered candidate trigger: the optimized in-mask pixel values, their
/// difference from the source region, and the job provenance. Non-converged
/// jobs still carry their best iterate.
struct ReversedTrigger {
  Tensor delta;            // {Ch,h,w} = optimized_patch - source region
  Tensor optimized_patch;  // {Ch,h,w}
  MaskRegion mask;
  std::int64_t source_image_id = -1;
  int intended_class = -1;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;
};

/// Minimizes cross-entropy toward `target` over the masked pixels with
/// projected Adam steps (clamp to [0,1] after every update); pixels outside
/// the mask are untouched. Starts from the image's own pixels and returns
/// the best-loss iterate, so final_loss <= initial_loss always. Throws on
/// non-finite loss.
ReversedTrigger reverse_engineer_trigger(ClassifierModel& model, const LabeledImage& img,
                                         int target, const MaskRegion& mask,
                                         const RevengSettings& opt);

struct RevengFailure {
  std::int64_t source_image_id = -1;
  int intended_class = -1;
  MaskRegion mask;
  std::string error;
};

struct SweepResult {
  std::vector<ReversedTrigger> triggers;
  std::vector<RevengFailure> failures;
};

/// One independent job per (Data_Trigger image, candidate class, mask).
/// Jobs run on up to `workers` threads over per-thread model clones; results
/// come back in job order regardless of scheduling. If out_dir is set every
/// job's tensors are written as produced plus an index manifest at the end.
SweepResult reverse_engineer_sweep(const ClassifierModel& model, const DetectionSplit& split,
                                   const std::vector<int>& classes,
                                   const std::vector<MaskRegion>& masks,
                                   const RevengSettings& opt, int workers,
                                   const std::optional<std::filesystem::path>& out_dir = {});

void save_sweep(const SweepResult& sweep, const std::filesystem::path& dir);
SweepResult load_sweep(const std::filesystem::path& dir);

}  // namespace mtd

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mtd/rng.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

/// Square trigger patch with per-pixel transparency and a target class
/// binding. A scalar alpha is stored broadcast into the per-pixel map.
struct Trigger {
  Tensor patch;  // {Ch,s,s} values in [0,1]
  Tensor alpha;  // {s,s} values in [0,1]
  int target_class = -1;
  std::uint64_t seed = 0;

  int size() const { return patch.empty() ? 0 : patch.dim(1); }
  int channels() const { return patch.empty() ? 0 : patch.dim(0); }
};

/// Top-left offset of the trigger window; valid placements keep the whole
/// patch inside the image: 0 <= row <= H-s, 0 <= col <= W-s.
struct Placement {
  int row = 0;
  int col = 0;
};

/// i.i.d. uniform random patch values, deterministic given seed.
Trigger make_random_trigger(int size, int channels, int target_class,
                            float alpha, std::uint64_t seed);

/// 2x2-cell black/white checkerboard patch (classic Badnet pattern).
Trigger make_checkerboard_trigger(int size, int channels, int target_class,
                                  float alpha);

/// Alpha-composites the trigger onto the image inside the s x s window at
/// `place`; pixels elsewhere are untouched. Output is clamped to [0,1]
/// (a no-op for in-range inputs). Throws on out-of-bounds placement.
Tensor composite(const Tensor& image, const Trigger& trig, Placement place);

/// Uniform draw over the (H-s+1)(W-s+1) valid placements.
Placement sample_placement(int height, int width, int size, Rng& rng);

/// Serialization: <stem>.bin holds the raw float32 patch then alpha
/// tensors, <stem>.json the metadata record {s, Ch, alpha mode,
/// target_class, seed}.
void save_trigger(const Trigger& trig, const std::filesystem::path& stem);
Trigger load_trigger(const std::filesystem::path& stem);

}  // namespace mtd

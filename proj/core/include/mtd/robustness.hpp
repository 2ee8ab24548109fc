#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtd/dataset.hpp"
#include "mtd/nn/model.hpp"
#include "mtd/poison.hpp"

namespace mtd {

enum class Direction { up, down, left, right };
enum class Subject { image, trigger };

Direction direction_from_string(const std::string& name);
std::string to_string(Direction d);
std::string to_string(Subject s);

struct TranslationSpec {
  Direction direction = Direction::up;
  int rows = 0;  // shift count; columns when direction is left/right
  Subject subject = Subject::image;
  float pad_value = 1.0f;  // white in canonical [0,1]
};

/// Shifts image content by `rows` in `direction` and fills the vacated
/// rows/columns with pad_value. Shape preserved. Throws when the shift is
/// not smaller than the image extent.
Tensor translate_image(const Tensor& image, const TranslationSpec& spec);

/// Shifts the trigger within its own window before compositing onto the
/// untranslated image; rows pushed outside the window are discarded, so a
/// partial (or empty) trigger lands on the image.
Tensor translate_trigger_composite(const Tensor& image, const Trigger& trig,
                                   Placement place, const TranslationSpec& spec);

struct RobustnessRow {
  Subject subject = Subject::image;
  Direction direction = Direction::up;
  int rows = 0;
  double pure_acc = 0.0;
  double trojan_acc = 0.0;
};

struct RobustnessGrid {
  std::vector<Direction> directions = {Direction::up, Direction::down};
  std::vector<int> row_counts;  // e.g. {0,1,2,...}
  std::vector<Subject> subjects = {Subject::image, Subject::trigger};
  float pad_value = 1.0f;
};

/// Accuracy grid under image/trigger translation. rows=0 entries reproduce
/// the untranslated accuracies exactly; trigger-subject rows never touch
/// the pure images, so their pure accuracy equals the clean evaluation
/// bit-for-bit.
std::vector<RobustnessRow> robustness_curves(ClassifierModel& model,
                                             const std::vector<LabeledImage>& test,
                                             const RobustnessGrid& grid,
                                             const PoisonSpec& attack, std::uint64_t seed);

void write_robustness_csv(const std::vector<RobustnessRow>& rows,
                          const std::filesystem::path& path);

}  // namespace mtd

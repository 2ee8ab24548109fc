#include "mtd/robustness.hpp"

#include <fstream>
#include <stdexcept>

#include "mtd/rng.hpp"
#include "mtd/training.hpp"

namespace mtd {

Direction direction_from_string(const std::string& name) {
  if (name == "up") return Direction::up;
  if (name == "down") return Direction::down;
  if (name == "left") return Direction::left;
  if (name == "right") return Direction::right;
  throw std::invalid_argument("unknown direction: " + name);
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::up: return "up";
    case Direction::down: return "down";
    case Direction::left: return "left";
    case Direction::right: return "right";
  }
  return "?";
}

std::string to_string(Subject s) { return s == Subject::image ? "image" : "trigger"; }

namespace {

Tensor transpose_hw(const Tensor& image) {
  const int channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  Tensor out({channels, width, height});
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) out.at(c, j, i) = image.at(c, i, j);
  return out;
}

Tensor translate_rows(const Tensor& image, bool up, int rows, float pad) {
  const int channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  Tensor out({channels, height, width});
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        const int src = up ? i + rows : i - rows;
        out.at(c, i, j) =
            (src >= 0 && src < height) ? image.at(c, src, j) : pad;
      }
  return out;
}

}  // namespace

Tensor translate_image(const Tensor& image, const TranslationSpec& spec) {
  const bool vertical = spec.direction == Direction::up || spec.direction == Direction::down;
  const int extent = vertical ? image.dim(1) : image.dim(2);
  if (spec.rows < 0 || spec.rows >= extent)
    throw std::invalid_argument("translate_image: shift must be in [0, extent)");
  if (spec.rows == 0) return image;
  if (vertical)
    return translate_rows(image, spec.direction == Direction::up, spec.rows, spec.pad_value);
  // Lateral shifts reuse the row logic through a transpose.
  const bool up_equiv = spec.direction == Direction::left;
  return transpose_hw(translate_rows(transpose_hw(image), up_equiv, spec.rows, spec.pad_value));
}

Tensor translate_trigger_composite(const Tensor& image, const Trigger& trig,
                                   Placement place, const TranslationSpec& spec) {
  const int s = trig.size();
  const int channels = image.dim(0);
  if (spec.rows < 0) throw std::invalid_argument("translate_trigger_composite: negative shift");
  if (spec.rows == 0) return composite(image, trig, place);
  const int k = spec.rows;
  if (k >= s) return image;  // trigger fully shifted out of its window

  const bool vertical = spec.direction == Direction::up || spec.direction == Direction::down;
  Tensor out = image;
  // Window row r takes patch row r+k (up) or r-k (down); rows without a
  // source patch row keep the image (that part of the trigger is lost).
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        int pi = i, pj = j;
        if (vertical)
          pi = spec.direction == Direction::up ? i + k : i - k;
        else
          pj = spec.direction == Direction::left ? j + k : j - k;
        if (pi < 0 || pi >= s || pj < 0 || pj >= s) continue;
        const float a = trig.alpha.data()[pi * s + pj];
        float v = (1.0f - a) * image.at(c, place.row + i, place.col + j) +
                  a * trig.patch.at(c, pi, pj);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.at(c, place.row + i, place.col + j) = v;
      }
    }
  }
  return out;
}

std::vector<RobustnessRow> robustness_curves(ClassifierModel& model,
                                             const std::vector<LabeledImage>& test,
                                             const RobustnessGrid& grid,
                                             const PoisonSpec& attack, std::uint64_t seed) {
  if (attack.empty())
    throw std::invalid_argument("robustness_curves: attack spec has no targets");

  std::vector<RobustnessRow> rows;
  const double clean_pure_acc = evaluate_pure_accuracy(model, test);

  for (Subject subject : grid.subjects) {
    for (Direction direction : grid.directions) {
      for (int shift : grid.row_counts) {
        TranslationSpec tspec;
        tspec.direction = direction;
        tspec.rows = shift;
        tspec.subject = subject;
        tspec.pad_value = grid.pad_value;

        RobustnessRow row;
        row.subject = subject;
        row.direction = direction;
        row.rows = shift;

        if (subject == Subject::image) {
          std::vector<LabeledImage> shifted = test;
          for (LabeledImage& img : shifted) img.pixels = translate_image(img.pixels, tspec);
          row.pure_acc = evaluate_pure_accuracy(model, shifted);
        } else {
          // Trigger translation never touches pure inputs.
          row.pure_acc = clean_pure_acc;
        }

        double sum = 0.0;
        for (int target : attack.target_classes) {
          const auto plan = plan_trojan_testset(
              test, attack, target, Rng::derive(seed, static_cast<std::uint64_t>(target)));
          const Trigger& trig = attack.triggers.at(target);
          std::vector<LabeledImage> poisoned;
          poisoned.reserve(plan.size());
          for (const TrojanPlanItem& item : plan) {
            LabeledImage img;
            img.label = target;
            img.id = item.source->id;
            if (subject == Subject::image) {
              img.pixels =
                  translate_image(composite(item.source->pixels, trig, item.place), tspec);
            } else {
              img.pixels =
                  translate_trigger_composite(item.source->pixels, trig, item.place, tspec);
            }
            poisoned.push_back(std::move(img));
          }
          const std::vector<int> preds = model.predict(poisoned);
          std::size_t hits = 0;
          for (int p : preds)
            if (p == target) ++hits;
          sum += static_cast<double>(hits) / static_cast<double>(preds.size());
        }
        row.trojan_acc = sum / static_cast<double>(attack.target_classes.size());
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_robustness_csv(const std::vector<RobustnessRow>& rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "subject,direction,rows,pure_acc,trojan_acc\n";
  for (const RobustnessRow& r : rows)
    out << to_string(r.subject) << "," << to_string(r.direction) << "," << r.rows << ","
        << r.pure_acc << "," << r.trojan_acc << "\n";
}

}  // namespace mtd

#include "mtd/trigger.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mtd/io_util.hpp"

namespace mtd {

Trigger make_random_trigger(int size, int channels, int target_class,
                            float alpha, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("make_random_trigger: size must be >= 1");
  if (alpha < 0.0f || alpha > 1.0f)
    throw std::invalid_argument("make_random_trigger: alpha must be in [0,1]");

  Trigger t;
  t.patch = Tensor({channels, size, size});
  t.alpha = Tensor::full({size, size}, alpha);
  t.target_class = target_class;
  t.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < t.patch.size(); ++i) t.patch[i] = rng.uniform_float();
  return t;
}

Trigger make_checkerboard_trigger(int size, int channels, int target_class,
                                  float alpha) {
  if (size < 1) throw std::invalid_argument("make_checkerboard_trigger: size must be >= 1");
  Trigger t;
  t.patch = Tensor({channels, size, size});
  t.alpha = Tensor::full({size, size}, alpha);
  t.target_class = target_class;
  const int cell = size >= 4 ? 2 : 1;
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        t.patch.at(c, i, j) = ((i / cell + j / cell) % 2 == 0) ? 1.0f : 0.0f;
  return t;
}

Tensor composite(const Tensor& image, const Trigger& trig, Placement place) {
  if (image.rank() != 3) throw std::invalid_argument("composite: image must be {Ch,H,W}");
  const int channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const int s = trig.size();
  if (trig.channels() != channels)
    throw std::invalid_argument("composite: channel count mismatch");
  if (place.row < 0 || place.col < 0 || place.row + s > height || place.col + s > width)
    throw std::out_of_range("composite: placement out of bounds");

  Tensor out = image;
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const float a = trig.alpha.data()[i * s + j];
        float v = (1.0f - a) * image.at(c, place.row + i, place.col + j) +
                  a * trig.patch.at(c, i, j);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.at(c, place.row + i, place.col + j) = v;
      }
    }
  }
  return out;
}

Placement sample_placement(int height, int width, int size, Rng& rng) {
  if (size < 1 || size > height || size > width)
    throw std::invalid_argument("sample_placement: trigger does not fit in image");
  Placement p;
  p.row = rng.uniform_int(height - size + 1);
  p.col = rng.uniform_int(width - size + 1);
  return p;
}

void save_trigger(const Trigger& trig, const std::filesystem::path& stem) {
  write_tensor_file(std::filesystem::path(stem).concat(".bin"),
                    {&trig.patch, &trig.alpha});
  nlohmann::json meta{{"s", trig.size()},
                      {"channels", trig.channels()},
                      {"target_class", trig.target_class},
                      {"seed", trig.seed}};
  write_text_file(std::filesystem::path(stem).concat(".json"), meta.dump(2) + "\n");
}

Trigger load_trigger(const std::filesystem::path& stem) {
  const auto meta = nlohmann::json::parse(
      read_text_file(std::filesystem::path(stem).concat(".json")));
  Trigger t;
  t.target_class = meta.at("target_class").get<int>();
  t.seed = meta.value("seed", std::uint64_t{0});
  const int s = meta.at("s").get<int>();
  const int channels = meta.at("channels").get<int>();
  t.patch = Tensor({channels, s, s});
  t.alpha = Tensor({s, s});
  std::vector<Tensor*> dst{&t.patch, &t.alpha};
  read_tensor_file(std::filesystem::path(stem).concat(".bin"), dst);
  return t;
}

}  // namespace mtd

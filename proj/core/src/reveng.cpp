#include "mtd/reveng.hpp"

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mtd/io_util.hpp"
#include "mtd/nn/optim.hpp"
#include "mtd/thread_pool.hpp"

namespace mtd {

MaskRegion make_mask_at(int image_height, int image_width, int row, int col) {
  if (image_height < 4 || image_width < 4)
    throw std::invalid_argument("make_mask: image must be at least 4x4");
  MaskRegion m;
  m.height = image_height / 4;
  m.width = image_width / 4;
  m.row = row;
  m.col = col;
  if (row < 0 || col < 0 || row + m.height > image_height || col + m.width > image_width)
    throw std::out_of_range("make_mask: offsets place the region outside the image");
  return m;
}

MaskRegion make_mask(int image_height, int image_width, const std::string& anchor) {
  const int h = image_height / 4, w = image_width / 4;
  const int mid_r = (image_height - h) / 2, mid_c = (image_width - w) / 2;
  const int max_r = image_height - h, max_c = image_width - w;
  int row, col;
  if (anchor == "center") {
    row = mid_r; col = mid_c;
  } else if (anchor == "top_left") {
    row = 0; col = 0;
  } else if (anchor == "top_right") {
    row = 0; col = max_c;
  } else if (anchor == "bottom_left") {
    row = max_r; col = 0;
  } else if (anchor == "bottom_right") {
    row = max_r; col = max_c;
  } else if (anchor == "top") {
    row = 0; col = mid_c;
  } else if (anchor == "bottom") {
    row = max_r; col = mid_c;
  } else if (anchor == "left") {
    row = mid_r; col = 0;
  } else if (anchor == "right") {
    row = mid_r; col = max_c;
  } else {
    throw std::invalid_argument("make_mask: unknown anchor '" + anchor + "'");
  }
  return make_mask_at(image_height, image_width, row, col);
}

std::vector<MaskRegion> nine_position_masks(int image_height, int image_width) {
  // One mask per quadrant (pushed to its outer corner so image borders are
  // covered), one at each point where two quadrants meet, one in the middle.
  static const char* kAnchors[] = {"top_left", "top",    "top_right",
                                   "left",     "center", "right",
                                   "bottom_left", "bottom", "bottom_right"};
  std::vector<MaskRegion> masks;
  masks.reserve(9);
  for (const char* anchor : kAnchors)
    masks.push_back(make_mask(image_height, image_width, anchor));
  return masks;
}

namespace {

void copy_region_out(const Tensor& batch, const MaskRegion& m, float* dst) {
  const int channels = batch.dim(1), width = batch.dim(3);
  std::size_t k = 0;
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < m.height; ++i)
      for (int j = 0; j < m.width; ++j)
        dst[k++] = batch.data()[(static_cast<std::size_t>(c) * batch.dim(2) + m.row + i) *
                                    width + m.col + j];
}

void copy_region_in(Tensor& batch, const MaskRegion& m, const float* src) {
  const int channels = batch.dim(1), width = batch.dim(3);
  std::size_t k = 0;
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < m.height; ++i)
      for (int j = 0; j < m.width; ++j)
        batch.data()[(static_cast<std::size_t>(c) * batch.dim(2) + m.row + i) * width +
                     m.col + j] = src[k++];
}

nlohmann::json trigger_record(const ReversedTrigger& rt) {
  return {{"source_image_id", rt.source_image_id},
          {"intended_class", rt.intended_class},
          {"mask", {{"row", rt.mask.row}, {"col", rt.mask.col},
                    {"height", rt.mask.height}, {"width", rt.mask.width}}},
          {"channels", rt.optimized_patch.dim(0)},
          {"initial_loss", rt.initial_loss},
          {"final_loss", rt.final_loss},
          {"converged", rt.converged}};
}

}  // namespace

ReversedTrigger reverse_engineer_trigger(ClassifierModel& model, const LabeledImage& img,
                                         int target, const MaskRegion& mask,
                                         const RevengSettings& opt) {
  const int channels = img.pixels.dim(0);
  const int height = img.pixels.dim(1), width = img.pixels.dim(2);
  if (height != model.input_shape()[1] || width != model.input_shape()[2] ||
      channels != model.input_shape()[0])
    throw std::invalid_argument("reverse_engineer_trigger: image shape mismatch");
  if (target < 0 || target >= model.class_count())
    throw std::invalid_argument("reverse_engineer_trigger: target class out of range");

  Tensor batch({1, channels, height, width});
  std::memcpy(batch.data(), img.pixels.data(), img.pixels.size() * sizeof(float));

  const std::size_t region_size =
      static_cast<std::size_t>(channels) * mask.height * mask.width;
  std::vector<float> region(region_size), region_grad(region_size), source(region_size),
      best(region_size);
  copy_region_out(batch, mask, source.data());
  region = source;
  best = source;

  nn::Adam adam(region_size, opt.lr);
  const std::vector<int> labels{target};
  double best_loss = 0.0, initial_loss = 0.0;
  bool converged = false;
  int streak = 0;

  for (int step = 0; step <= opt.max_steps; ++step) {
    double loss = 0.0;
    const Tensor grad = model.input_gradient(batch, labels, &loss);
    if (!std::isfinite(loss))
      throw std::runtime_error("reverse_engineer_trigger: non-finite loss at step " +
                               std::to_string(step));
    if (step == 0) {
      initial_loss = loss;
      best_loss = loss;
    } else if (loss < best_loss) {
      best_loss = loss;
      best = region;
    }

    // loss = -log p(target), so the early-stop probability test is a loss test.
    if (loss <= -std::log(opt.success_prob)) {
      if (++streak >= opt.stable_steps) {
        converged = true;
        break;
      }
    } else {
      streak = 0;
    }
    if (step == opt.max_steps) break;

    copy_region_out(grad, mask, region_grad.data());
    adam.step(region.data(), region_grad.data());
    for (float& v : region) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    copy_region_in(batch, mask, region.data());
  }

  ReversedTrigger out;
  out.mask = mask;
  out.source_image_id = img.id;
  out.intended_class = target;
  out.initial_loss = initial_loss;
  out.final_loss = best_loss;
  out.converged = converged;
  out.optimized_patch = Tensor({channels, mask.height, mask.width},
                               std::vector<float>(best.begin(), best.end()));
  out.delta = Tensor({channels, mask.height, mask.width});
  for (std::size_t i = 0; i < region_size; ++i) out.delta[i] = best[i] - source[i];
  return out;
}

SweepResult reverse_engineer_sweep(const ClassifierModel& model, const DetectionSplit& split,
                                   const std::vector<int>& classes,
                                   const std::vector<MaskRegion>& masks,
                                   const RevengSettings& opt, int workers,
                                   const std::optional<std::filesystem::path>& out_dir) {
  for (int c : classes)
    if (c < 0 || c >= model.class_count())
      throw std::invalid_argument("reverse_engineer_sweep: class out of range");

  struct Job {
    const LabeledImage* img;
    int target;
    MaskRegion mask;
  };
  std::vector<Job> jobs;
  for (const LabeledImage& img : split.data_trigger)
    for (int target : classes)
      for (const MaskRegion& mask : masks) jobs.push_back({&img, target, mask});

  std::vector<std::optional<ReversedTrigger>> slots(jobs.size());
  std::vector<std::optional<RevengFailure>> failures(jobs.size());
  std::mutex io_mutex;
  if (out_dir) std::filesystem::create_directories(*out_dir);

  // One model clone per worker slot; forward caches make a shared instance
  // unusable across threads.
  std::vector<ClassifierModel> clones(worker_count(jobs.size(), workers), model);
  parallel_for(jobs.size(), workers, [&](std::size_t worker, std::size_t i) {
    const Job& job = jobs[i];
    try {
      ReversedTrigger rt =
          reverse_engineer_trigger(clones[worker], *job.img, job.target, job.mask, opt);
      if (out_dir) {
        const auto path = *out_dir / ("trigger_job" + std::to_string(i) + ".bin");
        std::lock_guard<std::mutex> lock(io_mutex);
        write_tensor_file(path, {&rt.delta, &rt.optimized_patch});
      }
      slots[i] = std::move(rt);
    } catch (const std::exception& e) {
      failures[i] = RevengFailure{job.img->id, job.target, job.mask, e.what()};
    }
  });

  SweepResult result;
  nlohmann::json index;
  index["triggers"] = nlohmann::json::array();
  index["failures"] = nlohmann::json::array();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      if (out_dir) {
        nlohmann::json rec = trigger_record(*slots[i]);
        rec["file"] = "trigger_job" + std::to_string(i) + ".bin";
        index["triggers"].push_back(rec);
      }
      result.triggers.push_back(std::move(*slots[i]));
    }
    if (failures[i]) {
      index["failures"].push_back({{"source_image_id", failures[i]->source_image_id},
                                   {"intended_class", failures[i]->intended_class},
                                   {"error", failures[i]->error}});
      result.failures.push_back(std::move(*failures[i]));
    }
  }
  if (out_dir) write_text_file(*out_dir / "index.json", index.dump(2) + "\n");
  return result;
}

void save_sweep(const SweepResult& sweep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["triggers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sweep.triggers.size(); ++i) {
    nlohmann::json rec = trigger_record(sweep.triggers[i]);
    const std::string file = "trigger_" + std::to_string(i) + ".bin";
    rec["file"] = file;
    write_tensor_file(dir / file,
                      {&sweep.triggers[i].delta, &sweep.triggers[i].optimized_patch});
    index["triggers"].push_back(rec);
  }
  index["failures"] = nlohmann::json::array();
  for (const RevengFailure& f : sweep.failures)
    index["failures"].push_back({{"source_image_id", f.source_image_id},
                                 {"intended_class", f.intended_class},
                                 {"error", f.error}});
  write_text_file(dir / "index.json", index.dump(2) + "\n");
}

SweepResult load_sweep(const std::filesystem::path& dir) {
  const auto index = nlohmann::json::parse(read_text_file(dir / "index.json"));
  SweepResult out;
  for (const auto& rec : index.at("triggers")) {
    ReversedTrigger rt;
    rt.source_image_id = rec.at("source_image_id").get<std::int64_t>();
    rt.intended_class = rec.at("intended_class").get<int>();
    rt.mask.row = rec.at("mask").at("row").get<int>();
    rt.mask.col = rec.at("mask").at("col").get<int>();
    rt.mask.height = rec.at("mask").at("height").get<int>();
    rt.mask.width = rec.at("mask").at("width").get<int>();
    rt.initial_loss = rec.at("initial_loss").get<double>();
    rt.final_loss = rec.at("final_loss").get<double>();
    rt.converged = rec.at("converged").get<bool>();
    const int channels = rec.at("channels").get<int>();
    rt.delta = Tensor({channels, rt.mask.height, rt.mask.width});
    rt.optimized_patch = Tensor({channels, rt.mask.height, rt.mask.width});
    std::vector<Tensor*> dst{&rt.delta, &rt.optimized_patch};
    read_tensor_file(dir / rec.at("file").get<std::string>(), dst);
    out.triggers.push_back(std::move(rt));
  }
  for (const auto& rec : index.at("failures")) {
    RevengFailure f;
    f.source_image_id = rec.at("source_image_id").get<std::int64_t>();
    f.intended_class = rec.at("intended_class").get<int>();
    f.error = rec.at("error").get<std::string>();
    out.failures.push_back(std::move(f));
  }
  return out;
}

}  // namespace mtd

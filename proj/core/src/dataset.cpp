#include "mtd/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mtd/rng.hpp"

namespace fs = std::filesystem;

namespace mtd {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::uint32_t read_be32(std::istream& in, const std::string& ctx) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail("truncated file while reading " + ctx);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<LabeledImage> load_idx_pair(const fs::path& images_path,
                                        const fs::path& labels_path,
                                        std::int64_t id_base) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) fail("cannot open " + images_path.string());
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) fail("cannot open " + labels_path.string());

  if (read_be32(imgs, "image magic") != 0x00000803u)
    fail(images_path.string() + ": not an IDX3 image file");
  const std::uint32_t n = read_be32(imgs, "image count");
  const std::uint32_t h = read_be32(imgs, "image height");
  const std::uint32_t w = read_be32(imgs, "image width");

  if (read_be32(labs, "label magic") != 0x00000801u)
    fail(labels_path.string() + ": not an IDX1 label file");
  if (read_be32(labs, "label count") != n)
    fail(labels_path.string() + ": label count does not match image count");

  std::vector<LabeledImage> out;
  out.reserve(n);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (std::uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!imgs) fail(images_path.string() + ": truncated image data");
    char lab;
    labs.read(&lab, 1);
    if (!labs) fail(labels_path.string() + ": truncated label data");

    LabeledImage img;
    img.pixels = Tensor({1, static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t p = 0; p < buf.size(); ++p)
      img.pixels[p] = static_cast<float>(buf[p]) / 255.0f;
    img.label = static_cast<unsigned char>(lab);
    img.id = id_base + i;
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<LabeledImage> load_cifar_batch(const fs::path& path, std::int64_t id_base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  constexpr int kRecord = 1 + 3 * 32 * 32;
  std::vector<LabeledImage> out;
  std::vector<unsigned char> rec(kRecord);
  while (in.read(reinterpret_cast<char*>(rec.data()), kRecord)) {
    LabeledImage img;
    img.label = rec[0];
    if (img.label > 9) fail(path.string() + ": label out of range");
    img.pixels = Tensor({3, 32, 32});
    for (int i = 0; i < 3 * 32 * 32; ++i)
      img.pixels[static_cast<std::size_t>(i)] = static_cast<float>(rec[1 + i]) / 255.0f;
    img.id = id_base + static_cast<std::int64_t>(out.size());
    out.push_back(std::move(img));
  }
  if (in.gcount() != 0) fail(path.string() + ": trailing partial record");
  return out;
}

void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_pnm_int(std::istream& in, const std::string& ctx) {
  skip_pnm_space(in);
  int v = 0;
  if (!(in >> v)) fail("corrupt PNM header while reading " + ctx);
  return v;
}

// Netpbm PGM (P2/P5) and PPM (P3/P6).
Tensor load_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  char p, kind;
  in.get(p);
  in.get(kind);
  if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    fail(path.string() + ": unsupported image format (PGM/PPM expected)");
  const int channels = (kind == '3' || kind == '6') ? 3 : 1;
  const bool binary = (kind == '5' || kind == '6');
  const int w = read_pnm_int(in, "width");
  const int h = read_pnm_int(in, "height");
  const int maxval = read_pnm_int(in, "maxval");
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    fail(path.string() + ": unsupported PNM geometry");

  Tensor px({channels, h, w});
  const std::size_t n = static_cast<std::size_t>(channels) * h * w;
  if (binary) {
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) fail(path.string() + ": truncated pixel data");
    // PNM is interleaved HWC; canonical form is CHW.
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels; ++c)
          px.at(c, y, x) = static_cast<float>(buf[i++]) / static_cast<float>(maxval);
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels; ++c) {
          int v;
          if (!(in >> v)) fail(path.string() + ": truncated pixel data");
          px.at(c, y, x) = static_cast<float>(v) / static_cast<float>(maxval);
        }
  }
  return px;
}

Dataset load_dir(const fs::path& root) {
  const fs::path manifest = root / "manifest.csv";
  std::ifstream in(manifest);
  if (!in) fail("cannot open manifest " + manifest.string());

  Dataset ds;
  std::string line;
  std::int64_t id = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find_last_of(',');
    if (comma == std::string::npos) fail("manifest line missing label: " + line);
    const std::string file = line.substr(0, comma);
    if (file == "filename") continue;  // header row
    int label;
    try {
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail("manifest label is not an integer: " + line);
    }
    if (label < 0) fail("manifest label out of range: " + line);

    LabeledImage img;
    img.pixels = load_pnm(root / file);
    img.label = label;
    img.id = id++;
    max_label = std::max(max_label, label);

    if (ds.train.empty()) {
      ds.channels = img.pixels.dim(0);
      ds.height = img.pixels.dim(1);
      ds.width = img.pixels.dim(2);
    } else if (img.pixels.dim(0) != ds.channels || img.pixels.dim(1) != ds.height ||
               img.pixels.dim(2) != ds.width) {
      fail("inconsistent image geometry in " + file);
    }
    ds.train.push_back(std::move(img));
  }
  if (ds.train.empty()) fail("manifest lists no images: " + manifest.string());
  ds.class_count = max_label + 1;
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& descriptor, const std::string& data_root) {
  Dataset ds;
  if (descriptor == "mnist") {
    const fs::path root = data_root.empty() ? fs::path(".") : fs::path(data_root);
    ds.train = load_idx_pair(root / "train-images-idx3-ubyte",
                             root / "train-labels-idx1-ubyte", 0);
    ds.test = load_idx_pair(root / "t10k-images-idx3-ubyte",
                            root / "t10k-labels-idx1-ubyte",
                            static_cast<std::int64_t>(ds.train.size()));
    ds.class_count = 10;
    ds.channels = 1;
    ds.height = ds.train.front().pixels.dim(1);
    ds.width = ds.train.front().pixels.dim(2);
  } else if (descriptor == "cifar10") {
    const fs::path root = data_root.empty() ? fs::path(".") : fs::path(data_root);
    std::int64_t id = 0;
    for (int b = 1; b <= 5; ++b) {
      auto batch = load_cifar_batch(root / ("data_batch_" + std::to_string(b) + ".bin"), id);
      id += static_cast<std::int64_t>(batch.size());
      ds.train.insert(ds.train.end(), std::make_move_iterator(batch.begin()),
                      std::make_move_iterator(batch.end()));
    }
    ds.test = load_cifar_batch(root / "test_batch.bin", id);
    ds.class_count = 10;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
  } else if (descriptor.rfind("dir:", 0) == 0) {
    ds = load_dir(descriptor.substr(4));
  } else {
    fail("unknown dataset descriptor: " + descriptor);
  }

  for (const auto* split : {&ds.train, &ds.test})
    for (const LabeledImage& img : *split)
      if (img.label >= ds.class_count)
        fail("label " + std::to_string(img.label) + " out of range for C=" +
             std::to_string(ds.class_count));
  return ds;
}

DetectionSplit split_detection_sets(const std::vector<LabeledImage>& pure_validation,
                                    int n_trigger, int n_transfer,
                                    std::uint64_t seed, bool stratified,
                                    int class_count) {
  if (n_trigger < 1) fail("split_detection_sets: n_trigger must be >= 1");
  if (n_transfer < 1) fail("split_detection_sets: n_transfer must be >= 1");
  if (static_cast<std::size_t>(n_trigger) + static_cast<std::size_t>(n_transfer) >
      pure_validation.size())
    fail("split_detection_sets: insufficient pure images (" +
         std::to_string(pure_validation.size()) + " < " +
         std::to_string(n_trigger + n_transfer) + ")");

  std::vector<std::size_t> order(pure_validation.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  DetectionSplit split;
  if (stratified) {
    // Round-robin over classes for the trigger set so every class that has
    // pure representatives contributes reverse-engineering sources.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : order) by_class[pure_validation[i].label].push_back(i);
    std::vector<std::size_t> picked;
    while (static_cast<int>(picked.size()) < n_trigger) {
      bool any = false;
      for (auto& [cls, members] : by_class) {
        if (members.empty() || static_cast<int>(picked.size()) >= n_trigger) continue;
        picked.push_back(members.back());
        members.pop_back();
        any = true;
      }
      if (!any) break;
    }
    for (std::size_t i : picked) split.data_trigger.push_back(pure_validation[i]);
    std::vector<std::size_t> rest;
    for (std::size_t i : order)
      if (std::find(picked.begin(), picked.end(), i) == picked.end()) rest.push_back(i);
    for (int i = 0; i < n_transfer; ++i)
      split.data_transfer.push_back(pure_validation[rest[static_cast<std::size_t>(i)]]);
  } else {
    for (int i = 0; i < n_trigger; ++i)
      split.data_trigger.push_back(pure_validation[order[static_cast<std::size_t>(i)]]);
    for (int i = 0; i < n_transfer; ++i)
      split.data_transfer.push_back(
          pure_validation[order[static_cast<std::size_t>(n_trigger + i)]]);
  }

  if (class_count > 0) {
    std::vector<bool> seen(static_cast<std::size_t>(class_count), false);
    for (const LabeledImage& img : split.data_transfer)
      if (img.label < class_count) seen[static_cast<std::size_t>(img.label)] = true;
    for (int c = 0; c < class_count; ++c)
      if (!seen[static_cast<std::size_t>(c)]) split.transfer_missing_classes.push_back(c);
  }
  return split;
}

}  // namespace mtd

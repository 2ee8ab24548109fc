#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mtd/dataset.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

fs::path make_idx_dir(int n_train, int n_test, int side) {
  const fs::path dir = fs::temp_directory_path() / "mtd_test_idx";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto write_pair = [&](const std::string& img_name, const std::string& lab_name,
                              int n) {
    std::ofstream imgs(dir / img_name, std::ios::binary);
    write_be32(imgs, 0x803);
    write_be32(imgs, static_cast<std::uint32_t>(n));
    write_be32(imgs, static_cast<std::uint32_t>(side));
    write_be32(imgs, static_cast<std::uint32_t>(side));
    std::ofstream labs(dir / lab_name, std::ios::binary);
    write_be32(labs, 0x801);
    write_be32(labs, static_cast<std::uint32_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < side * side; ++p) {
        const unsigned char v = static_cast<unsigned char>((i * 37 + p * 11) % 256);
        imgs.write(reinterpret_cast<const char*>(&v), 1);
      }
      const unsigned char label = static_cast<unsigned char>(i % 10);
      labs.write(reinterpret_cast<const char*>(&label), 1);
    }
  };
  write_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte", n_train);
  write_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", n_test);
  return dir;
}

fs::path make_pgm_dir() {
  const fs::path dir = fs::temp_directory_path() / "mtd_test_pgm";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "a.pgm", std::ios::binary);
    f << "P5\n# comment\n4 4\n255\n";
    for (int i = 0; i < 16; ++i) {
      const unsigned char v = static_cast<unsigned char>(i * 16);
      f.write(reinterpret_cast<const char*>(&v), 1);
    }
  }
  {
    std::ofstream f(dir / "b.pgm");
    f << "P2\n4 4\n255\n";
    for (int i = 0; i < 16; ++i) f << 255 << " ";
  }
  {
    std::ofstream f(dir / "c.ppm", std::ios::binary);
    f << "P6\n4 4\n255\n";
    for (int i = 0; i < 16; ++i) {
      const unsigned char rgb[3] = {255, 0, 128};
      f.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
  return dir;
}

}  // namespace

TEST_CASE("IDX loader: shapes, range, ids") {
  const fs::path dir = make_idx_dir(24, 8, 28);
  const Dataset ds = load_dataset("mnist", dir.string());
  CHECK(ds.class_count == 10);
  CHECK(ds.channels == 1);
  CHECK(ds.height == 28);
  CHECK(ds.width == 28);
  CHECK(ds.train.size() == 24);
  CHECK(ds.test.size() == 8);
  for (const LabeledImage& img : ds.train) {
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(img.pixels[i] >= 0.0f);
      CHECK(img.pixels[i] <= 1.0f);
    }
  }
  // ids are globally unique across train/test
  std::set<std::int64_t> ids;
  for (const auto& img : ds.train) ids.insert(img.id);
  for (const auto& img : ds.test) ids.insert(img.id);
  CHECK(ids.size() == 32);
}

TEST_CASE("IDX loader rejects corrupt files") {
  const fs::path dir = make_idx_dir(4, 2, 8);
  {
    std::ofstream bad(dir / "train-images-idx3-ubyte", std::ios::binary);
    bad << "not an idx file";
  }
  CHECK_THROWS(load_dataset("mnist", dir.string()));
  CHECK_THROWS(load_dataset("mnist", (dir / "missing").string()));
  CHECK_THROWS(load_dataset("not-a-dataset", dir.string()));
}

TEST_CASE("directory loader with CSV manifest") {
  const fs::path dir = make_pgm_dir();
  {
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "filename,label\n";
    manifest << "a.pgm,0\nb.pgm,1\n";
  }
  const Dataset ds = load_dataset("dir:" + dir.string());
  CHECK(ds.train.size() == 2);
  CHECK(ds.class_count == 2);
  CHECK(ds.channels == 1);
  CHECK(ds.train[0].pixels.at(0, 0, 1) == doctest::Approx(16.0f / 255.0f));
  CHECK(ds.train[1].pixels.at(0, 3, 3) == 1.0f);

  SUBCASE("color images load as 3 channels") {
    {
      std::ofstream manifest(dir / "manifest.csv");
      manifest << "c.ppm,2\n";
    }
    const Dataset color = load_dataset("dir:" + dir.string());
    CHECK(color.channels == 3);
    CHECK(color.class_count == 3);
    CHECK(color.train[0].pixels.at(0, 0, 0) == 1.0f);
    CHECK(color.train[0].pixels.at(1, 0, 0) == 0.0f);
  }

  SUBCASE("bad labels are rejected") {
    {
      std::ofstream manifest(dir / "manifest.csv");
      manifest << "a.pgm,notanumber\n";
    }
    CHECK_THROWS(load_dataset("dir:" + dir.string()));
  }
}

TEST_CASE("detection split: disjoint, deterministic, validated") {
  std::vector<LabeledImage> pool;
  for (int i = 0; i < 1000; ++i) {
    LabeledImage img;
    img.pixels = Tensor({1, 2, 2});
    img.label = i % 10;
    img.id = i;
    pool.push_back(std::move(img));
  }

  const DetectionSplit split = split_detection_sets(pool, 20, 200, 0);
  CHECK(split.data_trigger.size() == 20);
  CHECK(split.data_transfer.size() == 200);
  std::set<std::int64_t> trig_ids, trans_ids;
  for (const auto& img : split.data_trigger) trig_ids.insert(img.id);
  for (const auto& img : split.data_transfer) trans_ids.insert(img.id);
  CHECK(trig_ids.size() == 20);
  CHECK(trans_ids.size() == 200);
  for (std::int64_t id : trig_ids) CHECK(trans_ids.count(id) == 0);

  const DetectionSplit same = split_detection_sets(pool, 20, 200, 0);
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(same.data_trigger[i].id == split.data_trigger[i].id);
  for (std::size_t i = 0; i < 200; ++i)
    CHECK(same.data_transfer[i].id == split.data_transfer[i].id);

  const DetectionSplit other = split_detection_sets(pool, 20, 200, 1);
  bool differs = false;
  for (std::size_t i = 0; i < 20; ++i)
    if (other.data_trigger[i].id != split.data_trigger[i].id) differs = true;
  CHECK(differs);

  CHECK_THROWS(split_detection_sets(pool, 0, 200, 0));
  CHECK_THROWS(split_detection_sets(pool, 20, 0, 0));
  CHECK_THROWS(split_detection_sets(pool, 900, 200, 0));
}

TEST_CASE("detection split reports missing transfer classes") {
  std::vector<LabeledImage> pool;
  for (int i = 0; i < 30; ++i) {
    LabeledImage img;
    img.pixels = Tensor({1, 2, 2});
    img.label = 0;  // single class present
    img.id = i;
    pool.push_back(std::move(img));
  }
  const DetectionSplit split = split_detection_sets(pool, 5, 20, 0, false, 10);
  CHECK(split.transfer_missing_classes.size() == 9);
}

TEST_CASE("stratified split spreads trigger images over classes") {
  std::vector<LabeledImage> pool;
  for (int i = 0; i < 300; ++i) {
    LabeledImage img;
    img.pixels = Tensor({1, 2, 2});
    img.label = i % 10;
    img.id = i;
    pool.push_back(std::move(img));
  }
  const DetectionSplit split = split_detection_sets(pool, 20, 100, 3, true, 10);
  std::map<int, int> per_class;
  for (const auto& img : split.data_trigger) ++per_class[img.label];
  CHECK(per_class.size() == 10);
  for (const auto& [cls, n] : per_class) CHECK(n == 2);
}

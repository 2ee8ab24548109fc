#include "mtd/io_util.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtd {

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<const Tensor*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Tensor* t : tensors)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void read_tensor_file(const std::filesystem::path& path,
                      const std::vector<Tensor*>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  for (Tensor* t : tensors) {
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated tensor file: " + path.string());
  }
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("tensor file larger than expected: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mtd

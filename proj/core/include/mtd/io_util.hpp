#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

/// Raw little-endian float32 tensor concatenation. Shapes are not encoded;
/// readers must know them (they come from the sidecar metadata records).
void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<const Tensor*>& tensors);

/// Fills the pre-shaped destination tensors from the file; throws on size
/// mismatch or truncation.
void read_tensor_file(const std::filesystem::path& path,
                      const std::vector<Tensor*>& tensors);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// FNV-1a 64-bit digest, hex encoded; used to stamp resolved configs into
/// artifacts.
std::string fnv1a_hex(const std::string& text);

}  // namespace mtd

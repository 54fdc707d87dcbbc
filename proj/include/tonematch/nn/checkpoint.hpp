#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tonematch::nn {

// On-disk model container. Layout, all little-endian:
//   magic "DTMO1" | u32 tensor count | per tensor:
//   u32 name length | name bytes (utf-8) | u32 rank | u32 dims[rank] |
//   f32 values[prod(dims)] (raw bit patterns, so round-trips are bit-exact).
struct NamedTensorData {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<NamedTensorData>& tensors);

std::vector<NamedTensorData> read_checkpoint(const std::filesystem::path& path);

// Lookup by exact name; DataError when absent.
const NamedTensorData& find_tensor(const std::vector<NamedTensorData>& tensors,
                                   const std::string& name);
bool has_tensor(const std::vector<NamedTensorData>& tensors,
                const std::string& name);

}  // namespace tonematch::nn

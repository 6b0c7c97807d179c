#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm {

// Container layout (all integers little-endian u32):
//   "NSRM", version, meta_count, {key_len, key, value_len, value}*,
//   tensor_count, {name_len, name, dtype (0 = f32), rank, dims*}*,
//   then every tensor payload in manifest order as little-endian f32.
// Tensors are stored sorted by name, so equal contents give equal bytes.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nsarm

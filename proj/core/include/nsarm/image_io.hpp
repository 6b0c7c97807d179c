#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm {

// Binary PPM (P6, maxval 255). Images are [H, W, 3] floats in [0, 1]; values
// are rounded to the nearest 8-bit level on write.
std::vector<std::uint8_t> encode_ppm(const Tensor& image);
Tensor decode_ppm(std::span<const std::uint8_t> bytes);

void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

// Rounds to 8-bit levels, as a write/read round trip would.
Tensor quantize_8bit(const Tensor& image);

}  // namespace nsarm

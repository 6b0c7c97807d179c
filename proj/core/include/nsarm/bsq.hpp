#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm::bsq {

// h x w tokens of d bits each, row-major tokens then bit index.
struct BitTokenMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t d = 0;
  std::vector<std::uint8_t> bits;

  std::size_t tokens() const { return h * w; }
  std::uint8_t bit(std::size_t token, std::size_t j) const { return bits[token * d + j]; }

  friend bool operator==(const BitTokenMap&, const BitTokenMap&) = default;
};

struct Quantized {
  BitTokenMap tokens;
  Tensor values;
};

inline constexpr double kNormEps = 1e-8;

// Normalises each d-vector of r[h, w, d] onto the unit sphere and snaps it to
// the nearest vertex (+-1/sqrt(d), ...). Zero components (and zero vectors)
// map to bit 1.
Quantized quantize(const Tensor& r, std::size_t expected_dim = 0);
Tensor quantize_values(const Tensor& r);
Tensor dequantize(const BitTokenMap& tokens);

// Little-endian within bytes: global bit index token*d + j lands in byte
// index/8 at bit position index%8.
std::vector<std::uint8_t> pack_bits(const BitTokenMap& tokens);
BitTokenMap unpack_bits(std::span<const std::uint8_t> bytes, std::size_t h, std::size_t w, std::size_t d);

void validate(const BitTokenMap& tokens);

// Bits as a float tensor [h, w, d] of 0/1 (label form for the bitwise loss).
Tensor bits_as_tensor(const BitTokenMap& tokens);

}  // namespace nsarm::bsq

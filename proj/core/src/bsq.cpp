#include "nsarm/bsq.hpp"

#include <cmath>
#include <string>

namespace nsarm::bsq {

Quantized quantize(const Tensor& r, std::size_t expected_dim) {
  if (r.rank() != 3) throw ShapeError("bsq::quantize expects [h,w,d], got " + shape_str(r.shape()));
  const std::size_t h = r.dim(0), w = r.dim(1), d = r.dim(2);
  if (expected_dim != 0 && d != expected_dim) {
    throw ShapeError("bsq::quantize: token dimension " + std::to_string(d) + " does not match configured d = " +
                     std::to_string(expected_dim));
  }
  ensure_finite(r, "bsq::quantize input");
  Quantized q{{h, w, d, std::vector<std::uint8_t>(h * w * d)}, Tensor(r.shape())};
  const float mag = static_cast<float>(1.0 / std::sqrt(static_cast<double>(d)));
  for (std::size_t t = 0; t < h * w; ++t) {
    const float* v = r.ptr() + t * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(v[j]) * v[j];
    const bool degenerate = std::sqrt(s) <= kNormEps;
    for (std::size_t j = 0; j < d; ++j) {
      // the sign of v/|v| equals the sign of v
      const std::uint8_t bit = (degenerate || v[j] >= 0.0f) ? 1 : 0;
      q.tokens.bits[t * d + j] = bit;
      q.values[t * d + j] = bit ? mag : -mag;
    }
  }
  return q;
}

Tensor quantize_values(const Tensor& r) { return quantize(r).values; }

Tensor dequantize(const BitTokenMap& tokens) {
  validate(tokens);
  Tensor out({tokens.h, tokens.w, tokens.d});
  const float mag = static_cast<float>(1.0 / std::sqrt(static_cast<double>(tokens.d)));
  for (std::size_t i = 0; i < tokens.bits.size(); ++i) out[i] = tokens.bits[i] ? mag : -mag;
  return out;
}

std::vector<std::uint8_t> pack_bits(const BitTokenMap& tokens) {
  validate(tokens);
  std::vector<std::uint8_t> out((tokens.bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < tokens.bits.size(); ++i) {
    if (tokens.bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

BitTokenMap unpack_bits(std::span<const std::uint8_t> bytes, std::size_t h, std::size_t w, std::size_t d) {
  const std::size_t nbits = h * w * d;
  if (nbits == 0) throw ShapeError("unpack_bits: empty token map");
  if (bytes.size() != (nbits + 7) / 8) {
    throw ShapeError("unpack_bits: expected " + std::to_string((nbits + 7) / 8) + " bytes, got " +
                     std::to_string(bytes.size()));
  }
  BitTokenMap t{h, w, d, std::vector<std::uint8_t>(nbits)};
  for (std::size_t i = 0; i < nbits; ++i) t.bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  return t;
}

void validate(const BitTokenMap& tokens) {
  if (tokens.h == 0 || tokens.w == 0 || tokens.d == 0) throw ShapeError("bit token map has a zero dimension");
  if (tokens.bits.size() != tokens.h * tokens.w * tokens.d) throw ShapeError("bit token map length mismatch");
  for (std::uint8_t b : tokens.bits) {
    if (b > 1) throw std::invalid_argument("bit token map entry outside {0,1}");
  }
}

Tensor bits_as_tensor(const BitTokenMap& tokens) {
  validate(tokens);
  Tensor out({tokens.h, tokens.w, tokens.d});
  for (std::size_t i = 0; i < tokens.bits.size(); ++i) out[i] = tokens.bits[i];
  return out;
}

}  // namespace nsarm::bsq

#include "nsarm/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nsarm/atomic_file.hpp"

namespace nsarm {

namespace {

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("expected an [H,W,3] image, got " + shape_str(image.shape()));
}

std::uint8_t to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Reads the next whitespace-delimited header integer, skipping '#' comments.
std::size_t header_int(std::span<const std::uint8_t> b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw std::runtime_error("malformed PPM header");
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1u << 24)) throw std::runtime_error("PPM header value out of range");
    ++pos;
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  check_image(image);
  const std::string header = "P6\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (float v : image.data()) out.push_back(to_byte(v));
  return out;
}

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw std::runtime_error("not a binary PPM (P6)");
  std::size_t pos = 2;
  const std::size_t w = header_int(bytes, pos);
  const std::size_t h = header_int(bytes, pos);
  const std::size_t maxval = header_int(bytes, pos);
  if (w == 0 || h == 0) throw std::runtime_error("PPM has a zero dimension");
  if (maxval != 255) throw std::runtime_error("only 8-bit PPM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw std::runtime_error("malformed PPM header");
  ++pos;
  const std::size_t n = w * h * 3;
  if (bytes.size() - pos < n) throw std::runtime_error("PPM pixel data truncated");
  Tensor img({h, w, 3});
  for (std::size_t i = 0; i < n; ++i) img[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_file_atomic(path, encode_ppm(image)); }

Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

Tensor quantize_8bit(const Tensor& image) {
  Tensor out = image;
  for (float& v : out.data()) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

}  // namespace nsarm

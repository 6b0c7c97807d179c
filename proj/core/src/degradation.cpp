#include "nsarm/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nsarm/resample.hpp"

namespace nsarm {

void validate(const DegradationCfg& cfg) {
  auto check = [](std::pair<double, double> r, const char* what) {
    if (!(r.first >= 0.0) || !(r.second >= r.first)) {
      throw std::invalid_argument(std::string(what) + " range must satisfy 0 <= min <= max");
    }
  };
  check(cfg.blur_sigma, "blur_sigma");
  check(cfg.noise_std, "noise_std");
  if (cfg.noise_std.second > 1.0) throw std::invalid_argument("noise_std must lie in [0, 1]");
  if (cfg.scale_factor < 1) throw std::invalid_argument("scale_factor must be >= 1");
}

DegradationCfg degradation_preset(const std::string& name) {
  DegradationCfg c;
  if (name == "mild") {
    c.blur_sigma = {0.2, 1.0};
    c.noise_std = {0.0, 0.01};
  } else if (name == "medium") {
    c.blur_sigma = {0.5, 2.0};
    c.noise_std = {0.005, 0.03};
  } else if (name == "severe") {
    c.blur_sigma = {1.0, 3.0};
    c.noise_std = {0.02, 0.06};
    c.second_order = true;
  } else {
    throw std::invalid_argument("unknown degradation preset '" + name + "'");
  }
  return c;
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (image.rank() != 3) throw ShapeError("gaussian_blur expects [H,W,C]");
  if (sigma < 0.0) throw std::invalid_argument("blur sigma must be non-negative");
  if (sigma == 0.0) return image;
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;

  const long H = static_cast<long>(image.dim(0)), W = static_cast<long>(image.dim(1));
  const std::size_t C = image.dim(2);
  Tensor tmp(image.shape()), out(image.shape());
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          const long xx = std::clamp(x + i, 0L, W - 1);
          acc += k[i + radius] * image.at(y, xx, c);
        }
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          const long yy = std::clamp(y + i, 0L, H - 1);
          acc += k[i + radius] * tmp.at(yy, x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

void add_noise(Tensor& img, double std, Rng& rng) {
  if (std <= 0.0) return;
  for (float& v : img.data()) v = static_cast<float>(v + rng.normal() * std);
}

void clamp01(Tensor& img) {
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

Tensor degrade(const Tensor& gt, const DegradationCfg& cfg, Rng& rng) {
  validate(cfg);
  if (gt.rank() != 3) throw ShapeError("degrade expects [H,W,3]");
  const std::size_t s = cfg.scale_factor;
  if (gt.dim(0) % s != 0 || gt.dim(1) % s != 0) {
    throw ShapeError("image " + shape_str(gt.shape()) + " is not divisible by scale factor " + std::to_string(s));
  }
  const double sigma = rng.uniform(cfg.blur_sigma.first, cfg.blur_sigma.second);
  const double noise = rng.uniform(cfg.noise_std.first, cfg.noise_std.second);
  Tensor lr = resize_down(gaussian_blur(gt, sigma), Extent{gt.dim(0) / s, gt.dim(1) / s});
  add_noise(lr, noise, rng);
  clamp01(lr);
  if (cfg.second_order) {
    lr = gaussian_blur(lr, 0.5 * sigma / static_cast<double>(s));
    add_noise(lr, 0.5 * noise, rng);
    clamp01(lr);
  }
  return lr;
}

namespace {

struct Color {
  double r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void blend(Tensor& img, std::size_t y, std::size_t x, const Color& c, double alpha) {
  if (alpha <= 0.0) return;
  float* p = &img.at(y, x, 0);
  p[0] = static_cast<float>(p[0] * (1.0 - alpha) + c.r * alpha);
  p[1] = static_cast<float>(p[1] * (1.0 - alpha) + c.g * alpha);
  p[2] = static_cast<float>(p[2] * (1.0 - alpha) + c.b * alpha);
}

// Pixel coverage from a signed distance (negative inside), one-pixel ramp.
double coverage(double sd) { return std::clamp(0.5 - sd, 0.0, 1.0); }

Tensor toy_image(std::size_t side, Rng rng) {
  const double S = static_cast<double>(side);
  Tensor img({side, side, 3});
  const Color c0 = random_color(rng), c1 = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double u = ((x + 0.5) / S - 0.5) * ca + ((y + 0.5) / S - 0.5) * sa;
      const double t = std::clamp(u + 0.5, 0.0, 1.0);
      img.at(y, x, 0) = static_cast<float>(c0.r + (c1.r - c0.r) * t);
      img.at(y, x, 1) = static_cast<float>(c0.g + (c1.g - c0.g) * t);
      img.at(y, x, 2) = static_cast<float>(c0.b + (c1.b - c0.b) * t);
    }
  }

  const std::size_t shapes = 2 + rng.below(4);
  for (std::size_t s = 0; s < shapes; ++s) {
    const std::uint64_t kind = rng.below(3);
    const Color col = random_color(rng);
    const double cx = rng.uniform(0.1, 0.9) * S, cy = rng.uniform(0.1, 0.9) * S;
    const double a = rng.uniform(0.08, 0.35) * S, b = rng.uniform(0.08, 0.35) * S;
    const double rot = rng.uniform(0.0, std::numbers::pi);
    const double cr = std::cos(rot), sr = std::sin(rot);
    // stripe parameters (only used by kind 2)
    const double period = rng.uniform(6.0, 16.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Color col2 = random_color(rng);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = dx * cr + dy * sr, v = -dx * sr + dy * cr;
        double sd;
        if (kind == 1) {
          sd = std::max(std::abs(u) - a, std::abs(v) - b);
        } else {
          // scaled radial distance approximates the ellipse SDF near its edge
          const double q = std::sqrt((u * u) / (a * a) + (v * v) / (b * b));
          sd = (q - 1.0) * std::min(a, b);
        }
        const double cov = coverage(sd);
        if (cov <= 0.0) continue;
        if (kind == 2) {
          const double w = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / period + phase);
          const Color mix{col.r + (col2.r - col.r) * w, col.g + (col2.g - col.g) * w, col.b + (col2.b - col.b) * w};
          blend(img, y, x, mix, cov);
        } else {
          blend(img, y, x, col, cov);
        }
      }
    }
  }
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

}  // namespace

std::vector<Tensor> make_toy_dataset(std::size_t n, std::size_t side, const Rng& rng) {
  if (n == 0) throw std::invalid_argument("make_toy_dataset: n must be at least 1");
  if (side == 0) throw std::invalid_argument("make_toy_dataset: side must be positive");
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(toy_image(side, rng.split(i)));
  return out;
}

std::vector<SrPair> make_pairs(const std::vector<Tensor>& gts, const DegradationCfg& cfg, std::uint64_t seed) {
  const Rng base(seed, 0x6465677261646531ULL);
  std::vector<SrPair> out;
  out.reserve(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    Rng r = base.split(i);
    out.push_back({gts[i], degrade(gts[i], cfg, r)});
  }
  return out;
}

Tensor upsample_nearest(const Tensor& image, std::size_t factor) {
  if (image.rank() != 3 || factor == 0) throw ShapeError("upsample_nearest expects [H,W,C] and factor >= 1");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  Tensor out({H * factor, W * factor, C});
  for (std::size_t y = 0; y < H * factor; ++y) {
    for (std::size_t x = 0; x < W * factor; ++x) {
      for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) = image.at(y / factor, x / factor, c);
    }
  }
  return out;
}

}  // namespace nsarm

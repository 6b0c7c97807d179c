#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nsarm/rng.hpp"
#include "nsarm/tensor.hpp"

namespace nsarm {

struct DegradationCfg {
  std::pair<double, double> blur_sigma{0.2, 1.0};
  // Standard deviation in [0, 1] pixel units.
  std::pair<double, double> noise_std{0.0, 0.01};
  std::size_t scale_factor = 4;
  // Second blur + noise pass at the LR resolution with half the sampled strength.
  bool second_order = false;
};

void validate(const DegradationCfg& cfg);
// "mild", "medium" or "severe".
DegradationCfg degradation_preset(const std::string& name);

// Separable Gaussian blur with radius ceil(3 sigma) and edge replication;
// sigma = 0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& image, double sigma);

// blur -> area downsample by scale_factor -> additive Gaussian noise -> clamp [0, 1].
Tensor degrade(const Tensor& gt, const DegradationCfg& cfg, Rng& rng);

// Procedural GT images: colour gradients with anti-aliased ellipses,
// rectangles and low-frequency stripe patches, all in [0, 1]. Image i draws
// from rng.split(i), so the set is reproducible and order-independent.
std::vector<Tensor> make_toy_dataset(std::size_t n, std::size_t side, const Rng& rng);

struct SrPair {
  Tensor gt;
  Tensor lr;
};

// Degrades every GT image with its own generator split from `seed`.
std::vector<SrPair> make_pairs(const std::vector<Tensor>& gts, const DegradationCfg& cfg, std::uint64_t seed);

// Nearest-neighbour upsampling by an integer factor.
Tensor upsample_nearest(const Tensor& image, std::size_t factor);

}  // namespace nsarm

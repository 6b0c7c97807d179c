#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm {

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Ordered latent resolutions (h_k, w_k), k = 1..K, and the preliminary split:
// scales 1..k_t come from the transformation network, the rest are predicted.
struct ScaleSchedule {
  std::vector<Extent> scales;
  std::size_t k_t = 1;
  std::size_t latent_dim = 16;
  // Pixels per latent cell of the tokenizer this schedule is paired with.
  std::size_t pixel_factor = 4;

  std::size_t size() const { return scales.size(); }
  // 1-based.
  const Extent& scale(std::size_t k) const { return scales.at(k - 1); }
  const Extent& last() const { return scales.back(); }
  // Extent of the LR latent, i.e. scale k_t.
  const Extent& preliminary() const { return scale(k_t); }

  friend bool operator==(const ScaleSchedule&, const ScaleSchedule&) = default;
};

// Presets: 1024 (13 scales, 16x tokenizer, k_t = 7) and the desk preset 64
// (7 scales, 4x tokenizer, k_t = 3).
ScaleSchedule infinity_default_schedule(int target_side, std::size_t latent_dim = 16);

// Pixel side lengths for a preset, e.g. {16, 32, ..., 1024}.
std::vector<std::size_t> preset_pixel_sides(int target_side);

// Non-square variant: each preset side is scaled proportionally onto (latent_h, latent_w).
ScaleSchedule proportional_schedule(int target_side, Extent latent, std::size_t latent_dim = 16);

// Throws ScheduleError on any violated invariant.
void validate(const ScaleSchedule& schedule, Extent latent);
// Also checks that scale k_t matches the LR latent extent.
void validate_preliminary(const ScaleSchedule& schedule, Extent lr_latent);

// sum_{k=from..to} h_k * w_k, 1-based inclusive.
std::size_t token_count(const ScaleSchedule& schedule, std::size_t from_k, std::size_t to_k);

std::string to_string(const ScaleSchedule& schedule);
// Inverse of to_string: "1x1,2x2,4x4;k_t=2;d=16;factor=4".
ScaleSchedule parse_schedule(const std::string& text);

}  // namespace nsarm

#pragma once

#include <cmath>
#include <vector>

#include "nsarm/resample.hpp"
#include "nsarm/rng.hpp"
#include "nsarm/scale_schedule.hpp"
#include "nsarm/tensor.hpp"

namespace testing {

inline nsarm::Tensor random_tensor(nsarm::Shape shape, nsarm::Rng& rng, double scale = 1.0) {
  nsarm::Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.normal() * scale);
  return t;
}

inline nsarm::Tensor random_image(std::size_t h, std::size_t w, nsarm::Rng& rng) {
  nsarm::Tensor t({h, w, 3});
  for (float& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

// Gaussian noise summed over octaves (1x1 up to full size), so that every
// scale of a decomposition has energy to capture, like an encoder latent.
inline nsarm::Tensor random_latent(std::size_t side, std::size_t d, nsarm::Rng& rng, double scale = 0.5) {
  nsarm::Tensor f({side, side, d});
  for (std::size_t s = 1; s <= side; s *= 2) {
    const nsarm::Tensor octave = random_tensor({s, s, d}, rng, scale);
    f = nsarm::add(f, nsarm::resize_up(octave, {side, side}));
  }
  return f;
}

// A random valid schedule ending at (h, w) with 2 or more scales.
inline nsarm::ScaleSchedule random_schedule(std::size_t h, std::size_t w, std::size_t d, nsarm::Rng& rng) {
  nsarm::ScaleSchedule s;
  s.latent_dim = d;
  std::vector<nsarm::Extent> rev{{h, w}};
  while (rev.back().h > 1 || rev.back().w > 1) {
    const nsarm::Extent e = rev.back();
    rev.push_back({e.h > 1 ? 1 + rng.below(e.h - 1) : 1, e.w > 1 ? 1 + rng.below(e.w - 1) : 1});
    if (rev.size() > 2 && rng.bernoulli(0.25)) break;
  }
  if (rev.size() == 1) rev.push_back({1, 1});
  s.scales.assign(rev.rbegin(), rev.rend());
  s.k_t = 1 + rng.below(s.scales.size() - 1);
  return s;
}

}  // namespace testing

#pragma once

// A tiny pipeline for fast end-to-end tests: 8x8 images, 2x tokenizer,
// latents 4x4x4 and scales {1, 2, 4} with the LR latent at scale 2.

#include "nsarm/degradation.hpp"
#include "nsarm/pipeline.hpp"

namespace testing {

inline nsarm::ModelConfig micro_config() {
  nsarm::ModelConfig c;
  c.schedule.scales = {{1, 1}, {2, 2}, {4, 4}};
  c.schedule.k_t = 2;
  c.schedule.latent_dim = 4;
  c.schedule.pixel_factor = 2;
  c.tokenizer = {.latent_dim = 4, .downsample_factor = 2, .base_channels = 4, .latent_channels = 8};
  c.tnet.channels = 4;
  c.ar = {.model_dim = 16, .layers = 1, .heads = 2, .mlp_ratio = 2};
  return c;
}

inline std::vector<nsarm::SrPair> micro_pairs(std::size_t n, std::uint64_t seed = 1) {
  nsarm::DegradationCfg cfg = nsarm::degradation_preset("mild");
  cfg.scale_factor = 2;
  return nsarm::make_pairs(nsarm::make_toy_dataset(n, 8, nsarm::Rng(seed)), cfg, seed);
}

}  // namespace testing

#pragma once

#include <cstdint>
#include <vector>

#include "nsarm/pipeline.hpp"

namespace nsarm {

enum class SamplingMode { greedy, stochastic };

struct SamplingCfg {
  SamplingMode mode = SamplingMode::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

void validate(const SamplingCfg& cfg);

// logits [h, w, d] -> bits. Greedy: [z >= 0]; stochastic: Bernoulli(sigmoid(z / tau)).
bsq::BitTokenMap sample_bits(const Tensor& logits, const SamplingCfg& cfg, Rng& rng);

// p(R_k | R_1..R_{k-1}, c): prefix holds exactly k-1 residuals.
bsq::BitTokenMap predict_scale(const ArModel<float>& ar, const std::vector<Tensor>& prefix, std::size_t k,
                               const SamplingCfg& cfg, Rng& rng);

// Extends a residual prefix (0..K residuals) to all K scales with predict_scale.
std::vector<Tensor> continue_generation(const ArModel<float>& ar, std::vector<Tensor> prefix, const SamplingCfg& cfg,
                                        Rng& rng);

// BSQ-quantized outputs of T(lr): the k_t preliminary residuals.
std::vector<Tensor> preliminary_residuals(const TransformNet<float>& tnet, const Tensor& lr);

struct Generation {
  Tensor image;
  Tensor latent;  // accumulate(all residuals)
  std::vector<Tensor> residuals;
};

Generation super_resolve(const Nsarm& model, const Tensor& lr, const SamplingCfg& cfg);

// Residuals 1..k_replace come from decompose(encode(ref)); the rest are generated.
Generation pathway_replace_generate(const Nsarm& model, const Tensor& ref, std::size_t k_replace,
                                    const SamplingCfg& cfg);

}  // namespace nsarm

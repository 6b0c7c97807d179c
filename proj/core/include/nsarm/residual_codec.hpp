#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nsarm/bsq.hpp"
#include "nsarm/scale_schedule.hpp"
#include "nsarm/tensor.hpp"

namespace nsarm {

using Quantizer = std::function<Tensor(const Tensor&)>;

Quantizer identity_quantizer();
Quantizer bsq_quantizer();

// Per-scale residuals R_1..R_K ([h_k, w_k, d]) and AR inputs F~_1..F~_{K-1},
// where F~_k = down(F_k, scale k+1) is the input used to predict scale k+1.
struct ResidualQueue {
  ScaleSchedule schedule;
  std::vector<Tensor> residuals;
  std::vector<Tensor> inputs;

  friend bool operator==(const ResidualQueue&, const ResidualQueue&) = default;
};

// Multi-scale decomposition of a latent f[h, w, d]:
//   R_k = Q(down(F - F_{k-1}, (h_k, w_k))),  F_k = sum_{i<=k} up(R_i, (h, w)).
ResidualQueue decompose(const Tensor& f, const ScaleSchedule& schedule, const Quantizer& quantizer);

// As decompose, but R_k := r_prime[k] for k <= k_t; later residuals target
// the remaining error relative to the spliced prefix.
ResidualQueue cascaded_modify(const Tensor& f, const ScaleSchedule& schedule, const std::vector<Tensor>& r_prime,
                              const Quantizer& quantizer);

// F_k = sum_{i=1..upto_k} up(R_i, (h, w)); upto_k = 0 yields zeros.
Tensor accumulate(const ResidualQueue& queue, std::size_t upto_k);
Tensor accumulate(const std::vector<Tensor>& residuals, const ScaleSchedule& schedule, std::size_t upto_k);

// F~_1..F~_n for the given residual prefix, n = min(residuals.size(), K - 1).
std::vector<Tensor> accumulated_inputs(const std::vector<Tensor>& residuals, const ScaleSchedule& schedule);

// Bit labels of each residual (residuals must already be sphere vertices).
std::vector<bsq::BitTokenMap> labels(const ResidualQueue& queue);

// Token stream: "NSTK", u32 version, u32 K, then per scale u32 k, h, w, d
// followed by pack_bits payload. All integers little-endian.
std::vector<std::uint8_t> encode_token_stream(const std::vector<bsq::BitTokenMap>& scales);
std::vector<bsq::BitTokenMap> decode_token_stream(std::span<const std::uint8_t> bytes);

}  // namespace nsarm

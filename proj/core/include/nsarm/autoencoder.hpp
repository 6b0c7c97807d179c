#pragma once

#include <cstddef>
#include <vector>

#include "nsarm/nn.hpp"
#include "nsarm/residual_codec.hpp"

namespace nsarm {

struct AutoencoderConfig {
  std::size_t latent_dim = 16;
  // Pixels per latent cell: 2, 4, 8 or 16.
  std::size_t downsample_factor = 4;
  // Channels at the highest-resolution stage and at the latent resolution.
  std::size_t base_channels = 32;
  std::size_t latent_channels = 64;
};

// Convolutional image tokenizer: [B,H,W,3] images <-> [B,H/f,W/f,d] latents.
// Decoder outputs pass through a sigmoid, so they always lie in [0, 1].
template <class T>
class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& config, Rng& rng);

  const AutoencoderConfig& config() const { return config_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  Var<T> encode(const Var<T>& images) const;
  Var<T> decode(const Var<T>& latents) const;

  template <class U>
  Autoencoder<U> cast() const {
    Rng rng(0);
    Autoencoder<U> out(config_, rng);
    out.params().assign_from(params_);
    return out;
  }

 private:
  void check_image(const Shape& s) const;

  AutoencoderConfig config_;
  ParamSet<T> params_;
  std::vector<Conv2d<T>> enc_;
  std::vector<Conv2d<T>> dec_;
  std::size_t stages_ = 0;
};

// Single-image helpers on frozen float parameters.
Tensor encode_image(const Autoencoder<float>& ae, const Tensor& image);
Tensor decode_latent(const Autoencoder<float>& ae, const Tensor& latent);
// decode(accumulate(decompose(encode(x)))) with the BSQ quantizer.
Tensor reconstruct(const Autoencoder<float>& ae, const Tensor& image, const ScaleSchedule& schedule);

// MSE(decode(F + sg(F_q - F)), x) + beta * MSE(F, sg(F_q)) where F_q is the
// multi-scale BSQ reconstruction of F. The straight-through term makes the
// gradient into the encoder the gradient at the quantized latent.
template <class T>
Var<T> tokenizer_objective(const Autoencoder<T>& ae, const BasicTensor<T>& images, const ScaleSchedule& schedule,
                           double commitment, const Quantizer& quantizer, double* reconstruction = nullptr);

}  // namespace nsarm

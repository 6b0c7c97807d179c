#include "nsarm/autoencoder.hpp"

#include <string>

namespace nsarm {

namespace {
std::size_t stage_count(std::size_t factor) {
  switch (factor) {
    case 2: return 1;
    case 4: return 2;
    case 8: return 3;
    case 16: return 4;
    default: throw std::invalid_argument("autoencoder downsample factor must be 2, 4, 8 or 16");
  }
}
}  // namespace

template <class T>
Autoencoder<T>::Autoencoder(const AutoencoderConfig& config, Rng& rng)
    : config_(config), stages_(stage_count(config.downsample_factor)) {
  const std::size_t lo = config.base_channels, hi = config.latent_channels, d = config.latent_dim;
  const double g = 1.6;  // gain for GELU-activated layers
  // encoder: strided convs down to the latent grid, then two stride-1 convs
  std::size_t in = 3;
  for (std::size_t s = 0; s < stages_; ++s) {
    const std::size_t out = s + 1 == stages_ ? hi : lo;
    enc_.emplace_back(params_, "tok.enc" + std::to_string(enc_.size()), in, out, 3, 2, rng, g);
    in = out;
  }
  enc_.emplace_back(params_, "tok.enc" + std::to_string(enc_.size()), hi, hi, 3, 1, rng, g);
  enc_.emplace_back(params_, "tok.enc" + std::to_string(enc_.size()), hi, d, 3, 1, rng, 1.0);
  // decoder mirrors it with bilinear x2 upsampling between stages
  dec_.emplace_back(params_, "tok.dec0", d, hi, 3, 1, rng, g);
  dec_.emplace_back(params_, "tok.dec1", hi, hi, 3, 1, rng, g);
  in = hi;
  for (std::size_t s = 0; s < stages_; ++s) {
    dec_.emplace_back(params_, "tok.dec" + std::to_string(dec_.size()), in, lo, 3, 1, rng, g);
    in = lo;
  }
  dec_.emplace_back(params_, "tok.dec" + std::to_string(dec_.size()), lo, 3, 3, 1, rng, 1.0);
}

template <class T>
void Autoencoder<T>::check_image(const Shape& s) const {
  if (s.size() != 4 || s[3] != 3) throw ShapeError("autoencoder expects [B,H,W,3] images, got " + shape_str(s));
  const std::size_t f = config_.downsample_factor;
  if (s[1] % f != 0 || s[2] % f != 0) {
    throw ShapeError("image extent " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                     " is not divisible by the downsample factor " + std::to_string(f));
  }
}

template <class T>
Var<T> Autoencoder<T>::encode(const Var<T>& images) const {
  check_image(images.shape());
  Var<T> x = images;
  for (std::size_t i = 0; i + 1 < enc_.size(); ++i) x = ag::gelu(enc_[i](x));
  return enc_.back()(x);
}

template <class T>
Var<T> Autoencoder<T>::decode(const Var<T>& latents) const {
  const Shape& s = latents.shape();
  if (s.size() != 4 || s[3] != config_.latent_dim) {
    throw ShapeError("decode expects [B,h,w," + std::to_string(config_.latent_dim) + "], got " + shape_str(s));
  }
  Var<T> x = ag::gelu(dec_[0](latents));
  x = ag::gelu(dec_[1](x));
  for (std::size_t st = 0; st < stages_; ++st) {
    const Extent e = spatial_extent(x.shape());
    x = ag::resize(x, {e.h * 2, e.w * 2}, ResampleKind::bilinear);
    x = ag::gelu(dec_[2 + st](x));
  }
  return ag::sigmoid(dec_.back()(x));
}

template class Autoencoder<float>;
template class Autoencoder<double>;

namespace {
Tensor batched(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshaped(s);
}
Tensor unbatched(const Tensor& t) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  return t.reshaped(s);
}
}  // namespace

Tensor encode_image(const Autoencoder<float>& ae, const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("encode_image expects [H,W,3]");
  return unbatched(ae.encode(constant(batched(image))).value());
}

Tensor decode_latent(const Autoencoder<float>& ae, const Tensor& latent) {
  if (latent.rank() != 3) throw ShapeError("decode_latent expects [h,w,d]");
  return unbatched(ae.decode(constant(batched(latent))).value());
}

Tensor reconstruct(const Autoencoder<float>& ae, const Tensor& image, const ScaleSchedule& schedule) {
  const Tensor f = encode_image(ae, image);
  return decode_latent(ae, accumulate(decompose(f, schedule, bsq_quantizer()), schedule.size()));
}

template <class T>
Var<T> tokenizer_objective(const Autoencoder<T>& ae, const BasicTensor<T>& images, const ScaleSchedule& schedule,
                           double commitment, const Quantizer& quantizer, double* reconstruction) {
  Var<T> x = constant(images);
  Var<T> f = ae.encode(x);
  const Shape& fs = f.shape();
  const std::size_t per = fs[1] * fs[2] * fs[3];
  BasicTensor<T> fq(fs);
  for (std::size_t b = 0; b < fs[0]; ++b) {
    std::vector<float> one(f.value().ptr() + b * per, f.value().ptr() + (b + 1) * per);
    const Tensor lat({fs[1], fs[2], fs[3]}, std::move(one));
    const Tensor rec = accumulate(decompose(lat, schedule, quantizer), schedule.size());
    for (std::size_t i = 0; i < per; ++i) fq[b * per + i] = static_cast<T>(rec[i]);
  }
  Var<T> recon = ae.decode(ag::straight_through(f, fq));
  Var<T> rec_loss = ag::mse(recon, x);
  if (reconstruction) *reconstruction = static_cast<double>(rec_loss.value().item());
  if (commitment <= 0.0) return rec_loss;
  return ag::add(rec_loss, ag::scale(ag::mse(f, constant(fq)), commitment));
}

template Var<float> tokenizer_objective(const Autoencoder<float>&, const BasicTensor<float>&, const ScaleSchedule&,
                                        double, const Quantizer&, double*);
template Var<double> tokenizer_objective(const Autoencoder<double>&, const BasicTensor<double>&, const ScaleSchedule&,
                                         double, const Quantizer&, double*);

}  // namespace nsarm

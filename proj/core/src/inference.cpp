#include "nsarm/inference.hpp"

#include <cmath>

#include "nsarm/residual_codec.hpp"

namespace nsarm {

void validate(const SamplingCfg& cfg) {
  if (cfg.mode == SamplingMode::stochastic && !(cfg.temperature > 0.0)) {
    throw std::invalid_argument("sampling temperature must be > 0");
  }
}

bsq::BitTokenMap sample_bits(const Tensor& logits, const SamplingCfg& cfg, Rng& rng) {
  validate(cfg);
  if (logits.rank() != 3) throw ShapeError("sample_bits expects [h,w,d] logits");
  bsq::BitTokenMap out{logits.dim(0), logits.dim(1), logits.dim(2), std::vector<std::uint8_t>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    if (cfg.mode == SamplingMode::greedy) {
      out.bits[i] = z >= 0.0 ? 1 : 0;
    } else {
      const double p = 1.0 / (1.0 + std::exp(-z / cfg.temperature));
      out.bits[i] = rng.uniform() < p ? 1 : 0;
    }
  }
  return out;
}

bsq::BitTokenMap predict_scale(const ArModel<float>& ar, const std::vector<Tensor>& prefix, std::size_t k,
                               const SamplingCfg& cfg, Rng& rng) {
  const ScaleSchedule& s = ar.schedule();
  if (k < 1 || k > s.size()) throw std::out_of_range("predict_scale: k = " + std::to_string(k) + " out of range");
  if (prefix.size() != k - 1) {
    throw std::invalid_argument("predict_scale: scale " + std::to_string(k) + " needs " + std::to_string(k - 1) +
                                " prefix residuals, got " + std::to_string(prefix.size()));
  }
  std::vector<Var<float>> inputs;
  for (const Tensor& t : accumulated_inputs(prefix, s)) {
    Shape b{1};
    b.insert(b.end(), t.shape().begin(), t.shape().end());
    inputs.push_back(constant(t.reshaped(b)));
  }
  const auto logits = ar.forward(inputs, k, 1);
  const Extent e = s.scale(k);
  return sample_bits(logits.back().value().reshaped({e.h, e.w, s.latent_dim}), cfg, rng);
}

std::vector<Tensor> continue_generation(const ArModel<float>& ar, std::vector<Tensor> prefix, const SamplingCfg& cfg,
                                        Rng& rng) {
  const ScaleSchedule& s = ar.schedule();
  if (prefix.size() > s.size()) throw std::out_of_range("continue_generation: prefix longer than the schedule");
  for (std::size_t k = prefix.size() + 1; k <= s.size(); ++k) {
    prefix.push_back(bsq::dequantize(predict_scale(ar, prefix, k, cfg, rng)));
  }
  return prefix;
}

std::vector<Tensor> preliminary_residuals(const TransformNet<float>& tnet, const Tensor& lr) {
  if (lr.rank() != 3) throw ShapeError("preliminary_residuals expects an [H,W,3] LR image");
  Shape b{1};
  b.insert(b.end(), lr.shape().begin(), lr.shape().end());
  std::vector<Tensor> out;
  for (const Var<float>& r : tnet.forward(constant(lr.reshaped(b)))) {
    const Shape& s = r.shape();
    out.push_back(bsq::quantize_values(r.value().reshaped({s[1], s[2], s[3]})));
  }
  return out;
}

namespace {
Generation finish(const Nsarm& model, std::vector<Tensor> residuals) {
  Generation g;
  g.latent = accumulate(residuals, model.config.schedule, residuals.size());
  g.image = decode_latent(model.tokenizer, g.latent);
  g.residuals = std::move(residuals);
  return g;
}
}  // namespace

Generation super_resolve(const Nsarm& model, const Tensor& lr, const SamplingCfg& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  return finish(model, continue_generation(model.ar, preliminary_residuals(model.tnet, lr), cfg, rng));
}

Generation pathway_replace_generate(const Nsarm& model, const Tensor& ref, std::size_t k_replace,
                                    const SamplingCfg& cfg) {
  validate(cfg);
  const ScaleSchedule& s = model.config.schedule;
  if (k_replace > s.size()) {
    throw std::out_of_range("k_replace = " + std::to_string(k_replace) + " exceeds K = " + std::to_string(s.size()));
  }
  const ResidualQueue q = decompose(encode_image(model.tokenizer, ref), s, bsq_quantizer());
  std::vector<Tensor> prefix(q.residuals.begin(), q.residuals.begin() + static_cast<std::ptrdiff_t>(k_replace));
  Rng rng(cfg.seed);
  return finish(model, continue_generation(model.ar, std::move(prefix), cfg, rng));
}

}  // namespace nsarm

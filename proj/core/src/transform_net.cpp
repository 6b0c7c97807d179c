#include "nsarm/transform_net.hpp"

#include <string>

namespace nsarm {

template <class T>
TransformNet<T>::TransformNet(const ScaleSchedule& schedule, const TransformNetConfig& config, Rng& rng)
    : schedule_(schedule), config_(config) {
  validate(schedule_, schedule_.last());
  const std::size_t c = config.channels;
  const double g = 1.6;
  trunk_.emplace_back(params_, "tnet.trunk0", 3, c, 3, 1, rng, g);
  std::size_t f = schedule_.pixel_factor;
  if (f == 0 || (f & (f - 1)) != 0) throw std::invalid_argument("transform net needs a power-of-two pixel factor");
  while (f > 1) {
    trunk_.emplace_back(params_, "tnet.trunk" + std::to_string(trunk_.size()), c, c, 3, 2, rng, g);
    f /= 2;
  }
  trunk_.emplace_back(params_, "tnet.trunk" + std::to_string(trunk_.size()), c, c, 3, 1, rng, g);
  for (std::size_t k = 1; k <= schedule_.k_t; ++k) {
    heads_.emplace_back(params_, "tnet.head" + std::to_string(k), c, schedule_.latent_dim, 3, 1, rng, 1.0);
  }
}

template <class T>
std::vector<Var<T>> TransformNet<T>::forward(const Var<T>& lr_images) const {
  const Shape& s = lr_images.shape();
  const Extent lr_latent = schedule_.preliminary();
  const std::size_t f = schedule_.pixel_factor;
  if (s.size() != 4 || s[3] != 3 || s[1] != lr_latent.h * f || s[2] != lr_latent.w * f) {
    throw ShapeError("transform net expects LR images [B," + std::to_string(lr_latent.h * f) + "," +
                     std::to_string(lr_latent.w * f) + ",3], got " + shape_str(s));
  }
  Var<T> x = lr_images;
  for (const auto& conv : trunk_) x = ag::gelu(conv(x));
  std::vector<Var<T>> out;
  out.reserve(heads_.size());
  for (std::size_t k = 1; k <= heads_.size(); ++k) {
    out.push_back(heads_[k - 1](ag::resize(x, schedule_.scale(k), ResampleKind::area)));
  }
  return out;
}

template <class T>
Var<T> stage1_loss(const std::vector<Var<T>>& predicted, const std::vector<BasicTensor<T>>& targets) {
  if (predicted.empty() || predicted.size() != targets.size()) {
    throw ShapeError("stage1_loss: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(targets.size()) + " targets");
  }
  Var<T> total;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    Var<T> term = ag::mse(predicted[k], constant(targets[k]));
    total = total.defined() ? ag::add(total, term) : term;
  }
  return ag::scale(total, 1.0 / static_cast<double>(predicted.size()));
}

template class TransformNet<float>;
template class TransformNet<double>;
template Var<float> stage1_loss(const std::vector<Var<float>>&, const std::vector<BasicTensor<float>>&);
template Var<double> stage1_loss(const std::vector<Var<double>>&, const std::vector<BasicTensor<double>>&);

}  // namespace nsarm

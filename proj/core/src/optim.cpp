#include "nsarm/optim.hpp"

#include <cmath>

namespace nsarm {

void validate(const AdamWCfg& cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("adam eps must be positive");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
}

void adamw_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamWCfg& cfg) {
  if (param.shape() != grad.shape()) {
    throw ShapeError("adamw_step: param " + shape_str(param.shape()) + " vs grad " + shape_str(grad.shape()));
  }
  if (state.t == 0) {
    state.m = Tensor(param.shape());
    state.v = Tensor(param.shape());
  } else if (state.m.shape() != param.shape()) {
    throw ShapeError("adamw_step: optimizer state does not match parameter shape");
  }
  ++state.t;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    double p = static_cast<double>(param[i]) * decay;
    p -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    param[i] = static_cast<float>(p);
  }
}

AdamW::AdamW(std::vector<Var<float>> params, AdamWCfg cfg)
    : params_(std::move(params)), state_(params_.size()), cfg_(cfg) {
  validate(cfg_);
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adamw_step(params_[i].mutable_value(), params_[i].grad(), state_[i], cfg_);
  }
  ++steps_;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(std::vector<Var<float>>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (float g : p.grad_buffer().data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NonFiniteError("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-6);
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (float& g : p.grad_buffer().data()) g = static_cast<float>(g * s);
    }
  }
  return norm;
}

}  // namespace nsarm

#pragma once

#include <cstddef>
#include <vector>

#include "nsarm/nn.hpp"

namespace nsarm {

struct AdamWCfg {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

void validate(const AdamWCfg& cfg);

struct AdamState {
  Tensor m;
  Tensor v;
  std::size_t t = 0;
};

// One decoupled-weight-decay Adam update (PyTorch ordering):
//   p <- p * (1 - lr * wd);  m, v moments;  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
void adamw_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamWCfg& cfg);

class AdamW {
 public:
  AdamW(std::vector<Var<float>> params, AdamWCfg cfg);

  // Uses each parameter's accumulated gradient (zeros where none arrived).
  void step();
  void zero_grad();
  const AdamWCfg& config() const { return cfg_; }
  std::size_t steps() const { return steps_; }

 private:
  std::vector<Var<float>> params_;
  std::vector<AdamState> state_;
  AdamWCfg cfg_;
  std::size_t steps_ = 0;
};

// Scales all gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::vector<Var<float>>& params, double max_norm);

template <class T>
std::vector<Var<T>> collect_params(const ParamSet<T>& set) {
  std::vector<Var<T>> out;
  for (const auto& [name, v] : set.items()) out.push_back(v);
  return out;
}

}  // namespace nsarm

#pragma once

#include <vector>

#include "nsarm/nn.hpp"
#include "nsarm/scale_schedule.hpp"

namespace nsarm {

struct TransformNetConfig {
  std::size_t channels = 64;
};

// T(.): LR image [B, H, W, 3] -> k_t continuous residual maps [B, h_k, w_k, d].
// A shared conv trunk brings the LR image to the LR latent grid (scale k_t);
// each scale then area-pools the trunk features to (h_k, w_k) and applies its
// own 3x3 head.
template <class T>
class TransformNet {
 public:
  TransformNet(const ScaleSchedule& schedule, const TransformNetConfig& config, Rng& rng);

  const ScaleSchedule& schedule() const { return schedule_; }
  const TransformNetConfig& config() const { return config_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  std::vector<Var<T>> forward(const Var<T>& lr_images) const;

  template <class U>
  TransformNet<U> cast() const {
    Rng rng(0);
    TransformNet<U> out(schedule_, config_, rng);
    out.params().assign_from(params_);
    return out;
  }

 private:
  ScaleSchedule schedule_;
  TransformNetConfig config_;
  ParamSet<T> params_;
  std::vector<Conv2d<T>> trunk_;
  std::vector<Conv2d<T>> heads_;
};

// (1/K_t) sum_k mean((R_k - T(I_LR)_k)^2): per-element mean within each scale.
template <class T>
Var<T> stage1_loss(const std::vector<Var<T>>& predicted, const std::vector<BasicTensor<T>>& targets);

}  // namespace nsarm

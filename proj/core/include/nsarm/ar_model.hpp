#pragma once

#include <vector>

#include "nsarm/bsq.hpp"
#include "nsarm/nn.hpp"
#include "nsarm/scale_schedule.hpp"

namespace nsarm {

struct ArModelConfig {
  std::size_t model_dim = 128;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
};

// Next-scale transformer. The sequence is block k = 1..K: block 1 holds the
// learned condition embedding at every scale-1 position, block k >= 2 holds
// the projected accumulated input F~_{k-1} at scale k's resolution. Tokens in
// block k attend to blocks 1..k, and block k's outputs predict the bits of
// R_k through d parallel binary classifiers (the IVC head).
template <class T>
class ArModel {
 public:
  ArModel(const ScaleSchedule& schedule, const ArModelConfig& config, Rng& rng);

  const ScaleSchedule& schedule() const { return schedule_; }
  const ArModelConfig& config() const { return config_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // inputs[i] is F~_{i+1} as [B, h_{i+2}, w_{i+2}, d]; blocks 1..inputs.size()+1
  // are built. Returns logits [B, h_k, w_k, d] for k = from_k..inputs.size()+1.
  std::vector<Var<T>> forward(const std::vector<Var<T>>& inputs, std::size_t from_k, std::size_t batch) const;

  // Tokens consumed when predicting up to scale k: token_count(1, k).
  std::size_t sequence_length(std::size_t upto_k) const;
  std::size_t head_parameter_count() const;

  template <class U>
  ArModel<U> cast() const {
    Rng rng(0);
    ArModel<U> out(schedule_, config_, rng);
    out.params().assign_from(params_);
    return out;
  }

 private:
  struct Block {
    LayerNorm<T> ln1;
    Linear<T> qkv;
    Linear<T> proj;
    LayerNorm<T> ln2;
    Linear<T> fc1;
    Linear<T> fc2;
  };

  ScaleSchedule schedule_;
  ArModelConfig config_;
  ParamSet<T> params_;
  Var<T> condition_;
  Var<T> scale_embed_;
  std::vector<Var<T>> pos_rows_;
  std::vector<Var<T>> pos_cols_;
  Linear<T> input_proj_;
  std::vector<Block> blocks_;
  LayerNorm<T> final_ln_;
  Linear<T> head_;
};

// Mean over scales of the per-scale mean bitwise cross-entropy (each scale is
// normalised by its own N = h_k * w_k tokens and d bits).
template <class T>
Var<T> bitwise_ce_loss(const std::vector<Var<T>>& logits, const std::vector<BasicTensor<T>>& labels);

struct BitAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

// Pooled over all bits of all given scales; a bit is predicted as [logit >= 0].
BitAccuracy bit_accuracy(const std::vector<Tensor>& logits, const std::vector<Tensor>& labels);

}  // namespace nsarm

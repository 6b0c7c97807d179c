#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nsarm/ar_model.hpp"
#include "nsarm/autoencoder.hpp"
#include "nsarm/degradation.hpp"
#include "nsarm/optim.hpp"
#include "nsarm/transform_net.hpp"

namespace nsarm {

enum class Stage { tokenizer, ar_pretrain, stage1, stage2, stage2_from_scratch };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& text);

struct TrainCfg {
  Stage stage = Stage::tokenizer;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  // Optimizer steps for ar_pretrain / stage1 / stage2.
  std::size_t iterations = 1000;
  // Passes over the data for the tokenizer.
  std::size_t epochs = 10;
  // adamw.lr is ignored; learning_rate is used instead.
  AdamWCfg adamw;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  double clip_norm = 1.0;
  // Weight of the latent commitment term in the tokenizer objective.
  double commitment = 0.25;
};

void validate(const TrainCfg& cfg);

struct LogRow {
  std::size_t step = 0;
  std::string stage;
  double loss = 0.0;
  // NaN where the stage has no bit predictions.
  double bit_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<LogRow> rows;

  std::vector<double> losses() const;
};

// "step,stage,loss,bit_accuracy" with an empty accuracy field where undefined.
std::string history_csv(const TrainHistory& history);

// Trailing moving average (window w, shorter at the start).
std::vector<double> smoothed(const std::vector<double>& values, std::size_t window);

struct TrainHooks {
  std::function<void(const LogRow&)> on_step;
  // Called after every checkpoint_every steps with the step count.
  std::function<void(std::size_t)> on_checkpoint;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Multi-scale BSQ tokenizer training (straight-through on the latent).
TrainHistory train_tokenizer(Autoencoder<float>& tokenizer, const std::vector<Tensor>& images,
                             const ScaleSchedule& schedule, const TrainCfg& cfg, const TrainHooks& hooks = {});

// Next-scale pretraining of the AR model on GT decompositions of all K
// scales (stands in for the pretrained text-to-image base model).
TrainHistory train_ar_pretrain(ArModel<float>& ar, const Autoencoder<float>& tokenizer,
                               const std::vector<Tensor>& images, const TrainCfg& cfg, const TrainHooks& hooks = {});

// Stage 1: T(lr) regresses the GT residuals R_1..R_{k_t} of the frozen tokenizer.
TrainHistory train_stage1(TransformNet<float>& tnet, const Autoencoder<float>& tokenizer,
                          const std::vector<SrPair>& data, const TrainCfg& cfg, const TrainHooks& hooks = {});

// Stage 2: bitwise CE on scales k_t+1..K of cascaded-modified queues; updates
// both T and the AR model, the tokenizer stays frozen.
TrainHistory train_stage2(TransformNet<float>& tnet, ArModel<float>& ar, const Autoencoder<float>& tokenizer,
                          const std::vector<SrPair>& data, const TrainCfg& cfg, const TrainHooks& hooks = {});

template <class T>
struct Stage2Batch {
  Var<T> loss;
  std::vector<Var<T>> logits;           // scales k_t+1..K
  std::vector<BasicTensor<T>> labels;  // matching 0/1 bit maps
};

// One teacher-forced Stage-2 objective on a batch. `latents` are the frozen
// tokenizer's encodings of the GT images ([h,w,d] each) and `lr` the matching
// LR batch. The preliminary residuals enter the AR inputs through a
// differentiable path (straight-through BSQ, or plain normalisation when
// `relaxed`, which makes the objective smooth for finite differences); the
// residuals after k_t and all labels are constants of the step.
template <class T>
Stage2Batch<T> stage2_objective(const TransformNet<T>& tnet, const ArModel<T>& ar, const std::vector<Tensor>& latents,
                                const Tensor& lr, bool relaxed = false);

// Teacher-forced bit accuracy over data[indices], pooled over all predicted bits.
BitAccuracy teacher_forced_accuracy(const TransformNet<float>& tnet, const ArModel<float>& ar,
                                    const Autoencoder<float>& tokenizer, const std::vector<SrPair>& data,
                                    const std::vector<std::size_t>& indices, std::size_t batch_size = 16);

// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& items);
Tensor unstack(const Tensor& batch, std::size_t index);

}  // namespace nsarm

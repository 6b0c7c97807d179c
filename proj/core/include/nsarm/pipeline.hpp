#pragma once

#include <cstdint>
#include <string>

#include "nsarm/ar_model.hpp"
#include "nsarm/autoencoder.hpp"
#include "nsarm/checkpoint.hpp"
#include "nsarm/transform_net.hpp"

namespace nsarm {

struct ModelConfig {
  ScaleSchedule schedule;
  AutoencoderConfig tokenizer;
  TransformNetConfig tnet;
  ArModelConfig ar;
};

// Desk preset 64 or the 1024 preset, with architecture defaults.
ModelConfig default_model_config(int preset = 64);
void validate(const ModelConfig& cfg);

// The three networks of the pipeline. Tokenizer, transformation network and
// AR model draw their initial weights from independent streams of `seed`.
struct Nsarm {
  ModelConfig config;
  Autoencoder<float> tokenizer;
  TransformNet<float> tnet;
  ArModel<float> ar;

  Nsarm(const ModelConfig& cfg, std::uint64_t seed);
};

// All tensors ("tok.*", "tnet.*", "ar.*") plus the model configuration in meta.
Checkpoint make_checkpoint(const Nsarm& model, const std::string& stage);
Nsarm restore(const Checkpoint& ckpt);
ModelConfig config_from_meta(const Checkpoint& ckpt);

}  // namespace nsarm

#include "nsarm/pipeline.hpp"

namespace nsarm {

ModelConfig default_model_config(int preset) {
  ModelConfig cfg;
  cfg.schedule = infinity_default_schedule(preset);
  cfg.tokenizer.latent_dim = cfg.schedule.latent_dim;
  cfg.tokenizer.downsample_factor = cfg.schedule.pixel_factor;
  return cfg;
}

void validate(const ModelConfig& cfg) {
  validate(cfg.schedule, cfg.schedule.last());
  if (cfg.tokenizer.latent_dim != cfg.schedule.latent_dim) {
    throw std::invalid_argument("tokenizer latent_dim differs from the schedule's d");
  }
  if (cfg.tokenizer.downsample_factor != cfg.schedule.pixel_factor) {
    throw std::invalid_argument("tokenizer downsample factor differs from the schedule's pixel factor");
  }
  if (cfg.ar.model_dim == 0 || cfg.ar.heads == 0 || cfg.ar.model_dim % cfg.ar.heads != 0) {
    throw std::invalid_argument("ar model_dim must be a positive multiple of heads");
  }
  if (cfg.ar.layers == 0 || cfg.ar.mlp_ratio == 0) throw std::invalid_argument("ar layers and mlp_ratio must be >= 1");
  if (cfg.tnet.channels == 0) throw std::invalid_argument("tnet channels must be positive");
}

Nsarm::Nsarm(const ModelConfig& cfg, std::uint64_t seed)
    : config(cfg),
      tokenizer([&] {
        validate(cfg);
        Rng r(seed, 1);
        return Autoencoder<float>(cfg.tokenizer, r);
      }()),
      tnet([&] {
        Rng r(seed, 2);
        return TransformNet<float>(cfg.schedule, cfg.tnet, r);
      }()),
      ar([&] {
        Rng r(seed, 3);
        return ArModel<float>(cfg.schedule, cfg.ar, r);
      }()) {}

namespace {
std::size_t meta_size(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw std::runtime_error("checkpoint meta is missing '" + key + "'");
  return static_cast<std::size_t>(std::stoull(it->second));
}
}  // namespace

Checkpoint make_checkpoint(const Nsarm& model, const std::string& stage) {
  Checkpoint c;
  const ModelConfig& m = model.config;
  c.meta["stage"] = stage;
  c.meta["schedule"] = to_string(m.schedule);
  c.meta["tok.base_channels"] = std::to_string(m.tokenizer.base_channels);
  c.meta["tok.latent_channels"] = std::to_string(m.tokenizer.latent_channels);
  c.meta["tnet.channels"] = std::to_string(m.tnet.channels);
  c.meta["ar.model_dim"] = std::to_string(m.ar.model_dim);
  c.meta["ar.layers"] = std::to_string(m.ar.layers);
  c.meta["ar.heads"] = std::to_string(m.ar.heads);
  c.meta["ar.mlp_ratio"] = std::to_string(m.ar.mlp_ratio);
  for (const auto* set : {&model.tokenizer.params(), &model.tnet.params(), &model.ar.params()}) {
    for (auto& [name, t] : set->export_float()) c.tensors.emplace(name, std::move(t));
  }
  return c;
}

ModelConfig config_from_meta(const Checkpoint& c) {
  ModelConfig m;
  auto it = c.meta.find("schedule");
  if (it == c.meta.end()) throw std::runtime_error("checkpoint meta is missing 'schedule'");
  m.schedule = parse_schedule(it->second);
  m.tokenizer.latent_dim = m.schedule.latent_dim;
  m.tokenizer.downsample_factor = m.schedule.pixel_factor;
  m.tokenizer.base_channels = meta_size(c, "tok.base_channels");
  m.tokenizer.latent_channels = meta_size(c, "tok.latent_channels");
  m.tnet.channels = meta_size(c, "tnet.channels");
  m.ar.model_dim = meta_size(c, "ar.model_dim");
  m.ar.layers = meta_size(c, "ar.layers");
  m.ar.heads = meta_size(c, "ar.heads");
  m.ar.mlp_ratio = meta_size(c, "ar.mlp_ratio");
  return m;
}

Nsarm restore(const Checkpoint& ckpt) {
  Nsarm model(config_from_meta(ckpt), 0);
  model.tokenizer.params().import_float(ckpt.tensors);
  model.tnet.params().import_float(ckpt.tensors);
  model.ar.params().import_float(ckpt.tensors);
  return model;
}

}  // namespace nsarm

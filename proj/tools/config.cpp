#include "config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace nsarm::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::pair<double, double> to_range(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    const double x = to_double(key, v);
    return {x, x};
  }
  return {to_double(key, trim(v.substr(0, comma))), to_double(key, trim(v.substr(comma + 1)))};
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

void train_keys(std::map<std::string, Setter>& t, const std::string& section, TrainCfg RunConfig::*member) {
  t[section + ".learning_rate"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).learning_rate = to_double(k, v);
  };
  t[section + ".batch_size"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).batch_size = to_size(k, v);
  };
  t[section + ".iterations"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).iterations = to_size(k, v);
  };
  t[section + ".epochs"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).epochs = to_size(k, v);
  };
  t[section + ".weight_decay"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).adamw.weight_decay = to_double(k, v);
  };
  t[section + ".clip_norm"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).clip_norm = to_double(k, v);
  };
  t[section + ".checkpoint_every"] = [member](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*member).checkpoint_every = to_size(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["paths.data"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; };
    t["paths.checkpoints"] = [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint_dir = v; };
    t["paths.output"] = [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    t["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); };
    t["run.workers"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_size(k, v); };

    t["model.schedule"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      try {
        c.model.schedule = parse_schedule(v);
      } catch (const std::exception& e) {
        throw ConfigError(k + ": " + e.what());
      }
      c.model.tokenizer.latent_dim = c.model.schedule.latent_dim;
      c.model.tokenizer.downsample_factor = c.model.schedule.pixel_factor;
    };
    t["model.tokenizer_channels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.tokenizer.base_channels = to_size(k, v);
    };
    t["model.tokenizer_latent_channels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.tokenizer.latent_channels = to_size(k, v);
    };
    t["model.tnet_channels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.tnet.channels = to_size(k, v);
    };
    t["model.ar_dim"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.ar.model_dim = to_size(k, v); };
    t["model.ar_layers"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.ar.layers = to_size(k, v); };
    t["model.ar_heads"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.ar.heads = to_size(k, v); };
    t["model.ar_mlp_ratio"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.ar.mlp_ratio = to_size(k, v);
    };

    t["data.count"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.count = to_size(k, v); };
    t["data.side"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.side = to_size(k, v); };
    t["data.holdout"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.data.holdout = to_size(k, v); };

    t["degradation.blur_sigma"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.degradation.blur_sigma = to_range(k, v);
    };
    t["degradation.noise_std"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.degradation.noise_std = to_range(k, v);
    };
    t["degradation.scale_factor"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.degradation.scale_factor = to_size(k, v);
    };
    t["degradation.second_order"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.degradation.second_order = to_bool(k, v);
    };

    train_keys(t, "tokenizer", &RunConfig::tokenizer);
    t["tokenizer.commitment"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.tokenizer.commitment = to_double(k, v);
    };
    train_keys(t, "ar_pretrain", &RunConfig::ar_pretrain);
    train_keys(t, "stage1", &RunConfig::stage1);
    train_keys(t, "stage2", &RunConfig::stage2);
    t["stage2.from_scratch"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.stage2.stage = to_bool(k, v) ? Stage::stage2_from_scratch : Stage::stage2;
    };

    t["sampling.mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "greedy") {
        c.sampling.mode = SamplingMode::greedy;
      } else if (v == "stochastic") {
        c.sampling.mode = SamplingMode::stochastic;
      } else {
        throw ConfigError(k + ": expected greedy or stochastic, got '" + v + "'");
      }
    };
    t["sampling.temperature"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.sampling.temperature = to_double(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' outside a section");
    kv.set(section + "." + key, trim(line.substr(eq + 1)));
  }
  return kv;
}

void KeyValues::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void KeyValues::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig default_run_config() {
  RunConfig c;
  c.model = default_model_config(c.preset);
  c.degradation = degradation_preset("severe");
  c.metric_scales = default_metric_scales();

  c.tokenizer.stage = Stage::tokenizer;
  c.tokenizer.epochs = 30;
  c.tokenizer.batch_size = 8;
  c.tokenizer.learning_rate = 2e-3;

  c.ar_pretrain.stage = Stage::ar_pretrain;
  c.ar_pretrain.iterations = 400;
  c.ar_pretrain.batch_size = 8;
  c.ar_pretrain.learning_rate = 1e-3;

  c.stage1.stage = Stage::stage1;
  c.stage1.iterations = 1000;
  c.stage1.batch_size = 16;
  c.stage1.learning_rate = 1e-3;

  c.stage2.stage = Stage::stage2;
  c.stage2.iterations = 300;
  c.stage2.batch_size = 8;
  c.stage2.learning_rate = 3e-4;
  return c;
}

RunConfig build_config(const KeyValues& kv) {
  RunConfig c = default_run_config();
  const auto& e = kv.entries();

  // Presets first so that individual keys refine them.
  if (auto it = e.find("model.preset"); it != e.end()) {
    const std::size_t p = to_size(it->first, it->second);
    if (p != 64 && p != 1024) throw ConfigError("model.preset: expected 64 or 1024");
    c.preset = static_cast<int>(p);
    c.model = default_model_config(c.preset);
  }
  if (auto it = e.find("degradation.preset"); it != e.end()) {
    try {
      c.degradation = degradation_preset(it->second);
    } catch (const std::exception& ex) {
      throw ConfigError("degradation.preset: " + std::string(ex.what()));
    }
  }

  for (const auto& [key, value] : e) {
    if (key == "model.preset" || key == "degradation.preset") continue;
    if (key.rfind("metric_scale.", 0) == 0) {
      c.metric_scales[key.substr(13)] = to_double(key, value);
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, key, value);
  }

  for (TrainCfg* t : {&c.tokenizer, &c.ar_pretrain, &c.stage1, &c.stage2}) t->seed = c.seed;
  c.sampling.seed = c.seed;

  try {
    validate(c.model);
    validate(c.degradation);
    for (const TrainCfg* t : {&c.tokenizer, &c.ar_pretrain, &c.stage1, &c.stage2}) validate(*t);
    validate(c.sampling);
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  if (c.workers == 0) throw ConfigError("run.workers must be >= 1");
  if (c.data.count == 0 || c.data.holdout >= c.data.count) {
    throw ConfigError("data.holdout must be smaller than data.count");
  }
  const std::size_t pixels = c.model.schedule.last().h * c.model.schedule.pixel_factor;
  if (c.data.side != pixels) {
    throw ConfigError("data.side " + std::to_string(c.data.side) + " does not match the schedule's " +
                      std::to_string(pixels) + " pixels");
  }
  const std::size_t lr_pixels = c.model.schedule.preliminary().h * c.model.schedule.pixel_factor;
  if (c.data.side != lr_pixels * c.degradation.scale_factor) {
    throw ConfigError("degradation.scale_factor does not map data.side onto scale k_t of the schedule");
  }
  for (const auto& [name, factor] : c.metric_scales) {
    if (!(factor > 0.0)) throw ConfigError("metric_scale." + name + " must be positive");
  }
  return c;
}

std::string describe(const RunConfig& c) {
  std::ostringstream os;
  auto train = [&](const char* name, const TrainCfg& t) {
    os << "\n[" << name << "]\nlearning_rate = " << num(t.learning_rate) << "\nbatch_size = " << t.batch_size
       << "\niterations = " << t.iterations << "\nepochs = " << t.epochs
       << "\nweight_decay = " << num(t.adamw.weight_decay) << "\nclip_norm = " << num(t.clip_norm)
       << "\ncheckpoint_every = " << t.checkpoint_every << "\n";
  };
  os << "[paths]\ndata = " << c.data_dir.string() << "\ncheckpoints = " << c.checkpoint_dir.string()
     << "\noutput = " << c.output_dir.string() << "\n";
  os << "\n[run]\nseed = " << c.seed << "\nworkers = " << c.workers << "\n";
  os << "\n[model]\nschedule = " << to_string(c.model.schedule)
     << "\ntokenizer_channels = " << c.model.tokenizer.base_channels
     << "\ntokenizer_latent_channels = " << c.model.tokenizer.latent_channels
     << "\ntnet_channels = " << c.model.tnet.channels << "\nar_dim = " << c.model.ar.model_dim
     << "\nar_layers = " << c.model.ar.layers << "\nar_heads = " << c.model.ar.heads
     << "\nar_mlp_ratio = " << c.model.ar.mlp_ratio << "\n";
  os << "\n[data]\ncount = " << c.data.count << "\nside = " << c.data.side << "\nholdout = " << c.data.holdout << "\n";
  os << "\n[degradation]\nblur_sigma = " << num(c.degradation.blur_sigma.first) << ", "
     << num(c.degradation.blur_sigma.second) << "\nnoise_std = " << num(c.degradation.noise_std.first) << ", "
     << num(c.degradation.noise_std.second) << "\nscale_factor = " << c.degradation.scale_factor
     << "\nsecond_order = " << (c.degradation.second_order ? "true" : "false") << "\n";
  train("tokenizer", c.tokenizer);
  os << "commitment = " << num(c.tokenizer.commitment) << "\n";
  train("ar_pretrain", c.ar_pretrain);
  train("stage1", c.stage1);
  train("stage2", c.stage2);
  os << "from_scratch = " << (c.stage2.stage == Stage::stage2_from_scratch ? "true" : "false") << "\n";
  os << "\n[sampling]\nmode = " << (c.sampling.mode == SamplingMode::greedy ? "greedy" : "stochastic")
     << "\ntemperature = " << num(c.sampling.temperature) << "\n";
  os << "\n[metric_scale]\n";
  for (const auto& [name, factor] : c.metric_scales) os << name << " = " << num(factor) << "\n";
  return os.str();
}

}  // namespace nsarm::cli

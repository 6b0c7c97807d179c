#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsarm/degradation.hpp"
#include "nsarm/evaluation.hpp"
#include "nsarm/inference.hpp"
#include "nsarm/pipeline.hpp"
#include "nsarm/trainer.hpp"

namespace nsarm::cli {

// Bad flags, unknown keys and values that fail validation (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "section.key" -> value map read from
//
//   [section]
//   key = value   # comment
//
// Later assignments override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  void set(const std::string& key, const std::string& value);
  // "section.key=value"
  void set_assignment(const std::string& assignment);
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct DataCfg {
  std::size_t count = 512;
  std::size_t side = 64;
  std::size_t holdout = 64;
};

struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path output_dir = "out";
  int preset = 64;
  ModelConfig model;
  DataCfg data;
  DegradationCfg degradation;
  TrainCfg tokenizer;
  TrainCfg ar_pretrain;
  TrainCfg stage1;
  TrainCfg stage2;
  SamplingCfg sampling;
  MetricScales metric_scales;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

RunConfig default_run_config();
// Unknown keys and malformed values throw ConfigError.
RunConfig build_config(const KeyValues& kv);
// Round-trippable text form of every key (used for provenance next to artifacts).
std::string describe(const RunConfig& cfg);

}  // namespace nsarm::cli

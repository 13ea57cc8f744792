#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "layoutseq/data.hpp"
#include "layoutseq/model.hpp"
#include "layoutseq/sampler.hpp"
#include "layoutseq/training.hpp"

namespace layoutseq {

struct DataConfig {
  std::string name = "synthetic";
  std::string schema = "generic";
  std::string synth_style = "grid";
  int synth_count = 2000;
  int bins = kDefaultBins;
  int max_elements = kDefaultMaxElements;
  std::array<double, 3> split{0.90, 0.05, 0.05};
  double relation_sample_rate = 0.1;
  std::size_t max_relationships = 64;
  double noise_std = 0.01;
  int completion_known = 1;
};

struct PathConfig {
  std::string data;        // dataset directory (train/val/test .jsonl + manifest.json)
  std::string out = "out";
  std::string checkpoint;  // model stem, no extension
};

/// Every knob a CLI run uses. Serialized as a flat JSON object with
/// dotted keys such as "model.d_model" or "train.learning_rate".
struct RunConfig {
  ModelConfig model;
  SamplerConfig sampler;
  MixingPlan mixing = MixingPlan::reference();
  DataConfig data;
  Schedule train;
  PathConfig paths;
  std::uint64_t seed = 0;
  std::set<std::string> explicit_keys;  // keys set by a file or flag

  RunConfig();

  /// Applies the keys of a flat object; unknown keys and type mismatches
  /// throw Config naming the key.
  void apply(const nlohmann::json& flat);
  void set(const std::string& key, const nlohmann::json& value);
  nlohmann::json to_json() const;
  void validate() const;

  static std::vector<std::string> keys();
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace layoutseq

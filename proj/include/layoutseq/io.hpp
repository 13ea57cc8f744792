#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "layoutseq/model.hpp"
#include "layoutseq/vocab.hpp"

namespace layoutseq {

using nlohmann::json;

/// {"canvas": {"w": B, "h": B}, "elements": [{"category", "bbox": [x,y,w,h]}]}
/// with coordinates in bins.
json layout_to_json(const Layout& layout, const CategorySet& categories, int bins = kDefaultBins);

/// Inverse of layout_to_json. Unknown names throw UnknownCategory; other
/// problems throw InvalidInput naming the field.
Layout layout_from_json(const json& j, const CategorySet& categories, int bins = kDefaultBins,
                        const std::string& field = "layout");

/// Types are category names, sizes [{w, h}], relationships
/// [{a, b, relation}], draft/partial layouts in the form above. `task`
/// overrides (or supplies) the body's "task" field.
ConstraintSpec spec_from_json(const json& j, const Vocabulary& vocab, std::optional<Task> task = std::nullopt);
json spec_to_json(const ConstraintSpec& spec, const CategorySet& categories, int bins = kDefaultBins);

/// Debug form {"task": "...", "ids": [...]}.
json sequence_to_json(const TokenSequence& seq, Task task);
TokenSequence sequence_from_json(const json& j, const Vocabulary& vocab, Task* task = nullptr);

json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j);

/// A model restored from `<stem>.ckpt` plus its `<stem>.json` sidecar.
struct ModelBundle {
  ModelConfig config;
  std::unique_ptr<Vocabulary> vocab;
  std::unique_ptr<Seq2SeqModel> model;
  bool with_prefix = false;
  std::string snapshot_id;  // hash of the checkpoint bytes
  json metadata;
};

/// Writes the checkpoint and a sidecar with the config, vocabulary and
/// `metadata`. `stem` has no extension.
void save_model(const std::filesystem::path& stem, const Seq2SeqModel& model, const Vocabulary& vocab,
                bool with_prefix, const json& metadata = json::object());
ModelBundle load_model(const std::filesystem::path& stem);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace layoutseq

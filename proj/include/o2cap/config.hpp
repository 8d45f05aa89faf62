#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include <json.hpp>

#include "o2cap/dataset.hpp"
#include "o2cap/trainer.hpp"

namespace o2cap {

struct EvalConfig {
  int query_per_camera = 1;     // synthetic holdout only
  int gallery_per_camera = 2;
  std::string query;            // embedding files; empty: synthesize
  std::string gallery;
};

struct OutputConfig {
  std::string dir = "o2cap_out";
  EmbeddingEncoding encoding = EmbeddingEncoding::binary;
  std::string dump_associations;  // per-anchor association CSV, empty: off
  bool verbose = false;
};

/// Everything a run needs. Serialized as a flat JSON object with dotted keys
/// (`train.lr`, `assoc.k2`, ...); see default_config_json() for the full list.
struct RunConfig {
  SynthesisConfig synth;
  std::string data_path;  // empty: train on synthesize(synth)
  int batch_size = 0;     // 0: P * K; otherwise must equal it
  TrainConfig train;
  EvalConfig eval;
  OutputConfig output;

  nlohmann::json to_json() const;
  /// Strict decode: unknown keys and wrong value types throw ConfigError.
  /// Missing keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& flat);
  /// Field checks that do not need the data (the k2 <= C check happens once
  /// the camera count is known).
  void validate() const;
};

nlohmann::json default_config_json();

/// Reads a JSON config file; nested objects are flattened to dotted keys.
/// Throws IoError when the file cannot be read, ConfigError when it is not
/// a JSON object.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// Sets `key` from command-line text, typed after the key's default value.
/// Throws ConfigError for unknown keys and unparsable values.
void apply_override(nlohmann::json& flat, const std::string& key, const std::string& text);

/// defaults < file < overrides.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         std::span<const std::pair<std::string, std::string>> overrides);

/// Pretty-printed, key-sorted JSON of cfg.
void write_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace o2cap

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "smishing/corpus.hpp"
#include "smishing/pipeline.hpp"

namespace smishing {

struct DatasetEntry {
  std::filesystem::path path;
  DatasetSchema schema;
  nlohmann::json schema_json;  // as written, for config snapshots
};

// Everything a run needs. Relative paths in a config file resolve against
// the file's directory.
struct RunConfig {
  std::vector<DatasetEntry> datasets;
  std::filesystem::path relabel_lexicon;
  std::filesystem::path gazetteer;
  std::filesystem::path legitimate_phrases;
  std::filesystem::path smishing_phrases;
  double train_fraction = 0.8;
  bool stratify = true;
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "runs";
  std::size_t threads = 0;
  PipelineConfig pipeline;

  // Resource paths point into the data directory this library was built with.
  RunConfig();

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  // Throws ConfigError when the file is missing or malformed.
  static RunConfig load(const std::filesystem::path& path);

  // Loads gazetteer and phrase lists; throws DataError naming a missing file.
  TaggingResources load_resources() const;
  KeywordLexicon load_relabel_lexicon() const;
  LabelMap label_map() const;
};

// Directory holding the default configuration and resource files.
std::filesystem::path default_config_dir();
std::filesystem::path default_data_dir();

}  // namespace smishing

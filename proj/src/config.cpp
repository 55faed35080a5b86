#include "smishing/config.hpp"

#include <fstream>

#include "smishing/error.hpp"

#ifndef SMISHING_DATA_DIR
#define SMISHING_DATA_DIR "data"
#endif
#ifndef SMISHING_CONFIG_DIR
#define SMISHING_CONFIG_DIR "config"
#endif

namespace smishing {
namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " file not found: " + path.string());
}

}  // namespace

fs::path default_data_dir() { return SMISHING_DATA_DIR; }
fs::path default_config_dir() { return SMISHING_CONFIG_DIR; }

RunConfig::RunConfig()
    : relabel_lexicon(default_data_dir() / "smishing_keywords.txt"),
      gazetteer(default_data_dir() / "gazetteer.tsv"),
      legitimate_phrases(default_data_dir() / "legitimate_phrases.txt"),
      smishing_phrases(default_data_dir() / "smishing_phrases.txt") {}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : datasets) ds.push_back({{"path", d.path.string()}, {"schema", d.schema_json}});
  return {{"datasets", ds},
          {"relabel_lexicon", relabel_lexicon.string()},
          {"gazetteer", gazetteer.string()},
          {"legitimate_phrases", legitimate_phrases.string()},
          {"smishing_phrases", smishing_phrases.string()},
          {"train_fraction", train_fraction},
          {"stratify", stratify},
          {"seed", seed},
          {"output_dir", output_dir.string()},
          {"threads", threads},
          {"pipeline", pipeline.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("datasets")) {
      for (const auto& d : j.at("datasets")) {
        DatasetEntry e;
        e.path = resolve(base_dir, d.at("path").get<std::string>());
        e.schema_json = d.at("schema");
        e.schema = DatasetSchema::from_json(e.schema_json);
        c.datasets.push_back(std::move(e));
      }
    }
    if (j.contains("relabel_lexicon")) c.relabel_lexicon = resolve(base_dir, j["relabel_lexicon"].get<std::string>());
    if (j.contains("gazetteer")) c.gazetteer = resolve(base_dir, j["gazetteer"].get<std::string>());
    if (j.contains("legitimate_phrases")) {
      c.legitimate_phrases = resolve(base_dir, j["legitimate_phrases"].get<std::string>());
    }
    if (j.contains("smishing_phrases")) c.smishing_phrases = resolve(base_dir, j["smishing_phrases"].get<std::string>());
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.stratify = j.value("stratify", c.stratify);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    c.threads = j.value("threads", c.threads);
    if (j.contains("pipeline")) c.pipeline = PipelineConfig::from_json(j["pipeline"]);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

TaggingResources RunConfig::load_resources() const {
  require_file(gazetteer, "gazetteer");
  require_file(legitimate_phrases, "legitimate phrase list");
  require_file(smishing_phrases, "smishing phrase list");
  return {EntityGazetteer::load(gazetteer), PhraseLexicon::load(legitimate_phrases, smishing_phrases)};
}

KeywordLexicon RunConfig::load_relabel_lexicon() const {
  require_file(relabel_lexicon, "relabel lexicon");
  return KeywordLexicon::load(relabel_lexicon);
}

LabelMap RunConfig::label_map() const {
  LabelMap map;
  for (const auto& d : datasets) map[d.schema.source_id] = d.schema.label_map;
  return map;
}

}  // namespace smishing

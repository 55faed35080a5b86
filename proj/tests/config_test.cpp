#include "smishing/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "smishing/error.hpp"

namespace smishing {
namespace {

namespace fs = std::filesystem;

fs::path write_temp(const std::string& name, const std::string& contents) {
  const auto dir = fs::temp_directory_path() / "smishing_config_test";
  fs::create_directories(dir);
  std::ofstream(dir / name) << contents;
  return dir / name;
}

TEST(RunConfig, CheckedInDefaultsMatchBuiltInDefaults) {
  const auto loaded = RunConfig::load(fs::path(SMISHING_CONFIG_DIR) / "defaults.json").to_json();
  auto builtin = RunConfig().to_json();
  builtin["output_dir"] = (fs::path(SMISHING_CONFIG_DIR) / "runs").lexically_normal().string();
  EXPECT_EQ(loaded, builtin) << nlohmann::json::diff(builtin, loaded).dump(1);
}

TEST(RunConfig, RelativePathsResolveAgainstTheFile) {
  const auto path = write_temp("rel.json", R"({"gazetteer": "sub/g.tsv", "relabel_lexicon": "/abs/k.txt",
    "datasets": [{"path": "d.csv", "schema": {"source_id": "d", "label": 0, "text": 1,
                                             "label_map": {"spam": "spam"}}}]})");
  const auto c = RunConfig::load(path);
  EXPECT_EQ(c.gazetteer, path.parent_path() / "sub/g.tsv");
  EXPECT_EQ(c.relabel_lexicon, fs::path("/abs/k.txt"));
  ASSERT_EQ(c.datasets.size(), 1u);
  EXPECT_EQ(c.datasets[0].path, path.parent_path() / "d.csv");
  EXPECT_EQ(c.label_map().at("d").at("spam"), TernaryLabel::kSpam);
}

TEST(RunConfig, SnapshotRoundTrips) {
  RunConfig c;
  c.seed = 9;
  c.pipeline.fusion.k = 12;
  c.pipeline.streams.char_cnn.widths = {2, 4};
  const auto again = RunConfig::from_json(c.to_json(), fs::path());
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(RunConfig, ExampleDatasetConfigParses) {
  const auto c = RunConfig::load(fs::path(SMISHING_CONFIG_DIR) / "datasets.example.json");
  EXPECT_EQ(c.datasets.size(), 3u);
  EXPECT_EQ(c.datasets[0].schema.delimiter, '\t');
}

TEST(RunConfig, Errors) {
  EXPECT_THROW(RunConfig::load("/nonexistent/run.json"), ConfigError);
  EXPECT_THROW(RunConfig::load(write_temp("bad.json", "{not json")), ConfigError);
  EXPECT_THROW(RunConfig::load(write_temp("frac.json", R"({"train_fraction": 1.5})")), ConfigError);
  EXPECT_THROW(RunConfig::load(write_temp("type.json", R"({"seed": "x"})")), ConfigError);
  EXPECT_THROW(RunConfig::load(write_temp("fusion.json", R"({"pipeline": {"fusion": {"k": 0}}})")), ConfigError);

  RunConfig c;
  c.smishing_phrases = "/nonexistent/phrases.txt";
  try {
    c.load_resources();
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/phrases.txt"), std::string::npos);
  }
  c.relabel_lexicon = "/nonexistent/k.txt";
  EXPECT_THROW(c.load_relabel_lexicon(), DataError);
}

TEST(RunConfig, DefaultResourcesLoad) {
  const RunConfig c;
  const auto r = c.load_resources();
  EXPECT_FALSE(r.gazetteer.entries().empty());
  EXPECT_FALSE(r.phrases.smishing().empty());
  EXPECT_TRUE(c.load_relabel_lexicon().matches("please verify now"));
}

}  // namespace
}  // namespace smishing

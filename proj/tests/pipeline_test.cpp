#include "smishing/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "smishing/bundle.hpp"
#include "smishing/error.hpp"
#include "smishing/eval.hpp"

namespace smishing {
namespace {

namespace fs = std::filesystem;

constexpr const char* kGoldenText = "URGENT: Your UK bank account is locked. Verify at http://x.co";

const testing::SmallRun& run() {
  static const testing::SmallRun r = testing::small_run();
  return r;
}

const Pipeline& trained() {
  static const Pipeline p = Pipeline::train(run().train, run().train_targets, testing::default_resources(),
                                            testing::small_config(), 11);
  return p;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "smishing_pipeline_test" / name;
  fs::remove_all(dir);
  return dir;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(2); }

std::vector<std::string> golden_texts() {
  std::vector<std::string> out;
  for (const auto& c : read_json(fs::path(SMISHING_TEST_DATA_DIR) / "golden_prediction.json")) {
    out.push_back(c.at("text").get<std::string>());
  }
  return out;
}

bool nonzero(const FeatureValues& v) {
  if (const auto* s = std::get_if<SparseVector>(&v)) return !s->entries.empty();
  return std::get<nn::Vector>(v).cwiseAbs().maxCoeff() > 0.0;
}

bool finite(const FeatureValues& v) {
  if (const auto* s = std::get_if<SparseVector>(&v)) {
    for (const auto& [i, x] : s->entries) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
  return std::get<nn::Vector>(v).allFinite();
}

TEST(Streams, UrlAndCountryLandInTheirStreams) {
  const auto& s = trained().streams();
  const auto f = extract_stream_features(prepare("See http://a.co from the UK", testing::default_resources()), s);
  const auto url = s.structural_vocab->index_of("[URL]");
  const auto uk = s.semantic_vocab->index_of("country=UK");
  ASSERT_GE(url, 0);
  ASSERT_GE(uk, 0);
  EXPECT_GT(std::get<SparseVector>(f[1].values).at(static_cast<std::size_t>(url)), 0.0);
  EXPECT_GT(std::get<SparseVector>(f[0].values).at(static_cast<std::size_t>(uk)), 0.0);
  for (std::size_t i = 0; i < kStreamCount; ++i) EXPECT_EQ(f[i].stream, kStreamOrder[i]);
}

TEST(Streams, EmptyTextGivesFiniteFeatures) {
  const auto f = extract_stream_features(prepare("", testing::default_resources()), trained().streams());
  for (const auto& s : f) EXPECT_TRUE(finite(s.values)) << to_string(s.stream);
  const auto p = trained().classify("");
  EXPECT_TRUE(std::isfinite(p.probability));
  EXPECT_TRUE(p.tags.empty());
  EXPECT_TRUE(p.countries.empty());
}

TEST(Streams, MissingArtifactIsReported) {
  StreamArtifacts partial = trained().streams();
  partial.char_cnn.reset();
  EXPECT_THROW(partial.require_complete(), DataError);
  EXPECT_THROW(evaluate_stream(StreamId::kChar, run().test, run().test_targets, partial, 0.5), DataError);
}

TEST(Pipeline, GoldenMessageFiresEveryStream) {
  const auto prepared = prepare(kGoldenText, testing::default_resources());
  const auto f = extract_stream_features(prepared, trained().streams());
  for (const auto& s : f) EXPECT_TRUE(nonzero(s.values)) << to_string(s.stream);
  const auto p = trained().classify(kGoldenText);
  double total = 0.0;
  for (double a : p.attention) {
    EXPECT_GT(a, 0.0);
    total += a;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  ASSERT_EQ(p.countries, std::vector<std::string>{"UK"});
  const auto j = p.to_json();
  for (const char* key : {"probability", "label", "attention", "tags", "countries"}) EXPECT_TRUE(j.contains(key));
}

TEST(Pipeline, FrozenGoldenPredictions) {
  for (const auto& c : read_json(fs::path(SMISHING_TEST_DATA_DIR) / "golden_prediction.json")) {
    const auto text = c.at("text").get<std::string>();
    SCOPED_TRACE(text);
    const auto p = trained().classify(text);
    EXPECT_NEAR(p.probability, c.at("probability").get<double>(), 1e-6);
    std::vector<std::string> tags;
    for (const auto& t : p.tags) tags.push_back(t.tag);
    EXPECT_EQ(tags, c.at("tags").get<std::vector<std::string>>());
  }
}

TEST(Pipeline, InferenceIsDeterministic) {
  const auto a = trained().classify(kGoldenText);
  const auto b = trained().classify(prepare(kGoldenText, testing::default_resources()));
  EXPECT_EQ(a.probability, b.probability);
  EXPECT_EQ(a.attention, b.attention);
}

TEST(Bundle, RoundTripReproducesPredictions) {
  const auto dir = fresh_dir("roundtrip");
  const std::string hash = save_bundle(trained(), dir);
  EXPECT_EQ(hash, bundle_hash(dir));
  const Pipeline loaded = load_bundle(dir);
  auto texts = golden_texts();
  texts.insert(texts.end(), run().test_texts.begin(), run().test_texts.end());
  double worst = 0.0;
  for (const auto& t : texts) {
    const auto a = trained().classify(t);
    const auto b = loaded.classify(t);
    worst = std::max(worst, std::abs(a.probability - b.probability));
    for (std::size_t s = 0; s < kStreamCount; ++s) ASSERT_NEAR(a.attention[s], b.attention[s], 1e-6);
    ASSERT_EQ(a.tags, b.tags);
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_EQ(save_bundle(loaded, fresh_dir("resaved")), hash);
}

TEST(Bundle, SameSeedSameHashOtherSeedDiffers) {
  const auto first = save_bundle(trained(), fresh_dir("first"));
  const Pipeline again = Pipeline::train(run().train, run().train_targets, testing::default_resources(),
                                         testing::small_config(), 11);
  EXPECT_EQ(save_bundle(again, fresh_dir("again")), first);
  const Pipeline other = Pipeline::train(run().train, run().train_targets, testing::default_resources(),
                                         testing::small_config(), 12);
  EXPECT_NE(save_bundle(other, fresh_dir("other")), first);
}

TEST(Bundle, CorruptedFileIsNamed) {
  const auto dir = fresh_dir("corrupt");
  save_bundle(trained(), dir);
  {
    std::fstream f(dir / "streams/char_cnn.f32", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(17);
    f.put('\x7f');
  }
  try {
    load_bundle(dir);
    FAIL() << "expected BundleError";
  } catch (const BundleError& e) {
    EXPECT_NE(std::string(e.what()).find("streams/char_cnn.f32"), std::string::npos) << e.what();
  }
}

TEST(Bundle, MissingFileIsNamed) {
  const auto dir = fresh_dir("missing");
  save_bundle(trained(), dir);
  fs::remove(dir / "fusion/model.shapes.json");
  try {
    load_bundle(dir);
    FAIL() << "expected BundleError";
  } catch (const BundleError& e) {
    EXPECT_NE(std::string(e.what()).find("fusion/model.shapes.json"), std::string::npos) << e.what();
  }
}

TEST(Bundle, ManifestChecks) {
  const auto dir = fresh_dir("manifest");
  save_bundle(trained(), dir);
  const auto manifest = read_json(dir / "manifest.json");

  auto no_fingerprint = manifest;
  no_fingerprint.erase("tagging_patterns");
  write_json(dir / "manifest.json", no_fingerprint);
  EXPECT_THROW(load_bundle(dir), BundleError);

  auto wrong_fingerprint = manifest;
  wrong_fingerprint["tagging_patterns"]["fingerprint"] = std::string(64, '0');
  write_json(dir / "manifest.json", wrong_fingerprint);
  EXPECT_THROW(load_bundle(dir), BundleError);

  auto future = manifest;
  future["bundle_format"] = kBundleFormat + 1;
  write_json(dir / "manifest.json", future);
  EXPECT_THROW(load_bundle(dir), BundleError);

  auto uncovered = manifest;
  uncovered["files"].erase("threshold");
  write_json(dir / "manifest.json", uncovered);
  EXPECT_THROW(load_bundle(dir), BundleError);

  write_json(dir / "manifest.json", manifest);
  EXPECT_NO_THROW(load_bundle(dir));
  EXPECT_THROW(load_bundle(fresh_dir("absent")), BundleError);
}

TEST(Pipeline, ThresholdValidation) {
  Pipeline p = trained();
  p.set_threshold(0.7);
  EXPECT_DOUBLE_EQ(p.threshold(), 0.7);
  EXPECT_ANY_THROW(p.set_threshold(1.5));
}

}  // namespace
}  // namespace smishing

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smishing/charcnn.hpp"
#include "smishing/contextual.hpp"
#include "smishing/forest.hpp"
#include "smishing/fusion.hpp"
#include "smishing/tagging.hpp"
#include "smishing/tfidf.hpp"

namespace smishing {

struct TaggingResources {
  EntityGazetteer gazetteer;
  PhraseLexicon phrases;
};

struct TfidfConfig {
  std::size_t min_df = 1;
  std::size_t max_features = 0;  // 0 = unlimited

  nlohmann::json to_json() const { return {{"min_df", min_df}, {"max_features", max_features}}; }
  static TfidfConfig from_json(const nlohmann::json& j);
};

struct StreamConfig {
  TfidfConfig tfidf;
  ForestConfig forest;
  CharCnnConfig char_cnn;
  ContextualEncoderSpec encoder;
  ContextHeadConfig context_head;

  nlohmann::json to_json() const;
  static StreamConfig from_json(const nlohmann::json& j);
};

// The three tagged views of one message plus its raw text.
struct PreparedMessage {
  std::string raw;
  TaggedMessage semantic;
  TaggedMessage structural;
  TaggedMessage phrases;
};

PreparedMessage prepare(std::string_view text, const TaggingResources& resources);
std::vector<PreparedMessage> prepare_all(std::span<const std::string> texts,
                                         const TaggingResources& resources, std::size_t threads = 0);

using FeatureValues = std::variant<SparseVector, nn::Vector>;

struct StreamFeatures {
  StreamId stream = StreamId::kSemantic;
  FeatureValues values;
};

using StreamFeatureSet = std::array<StreamFeatures, kStreamCount>;

// Fitted extractors and standalone classifiers for the four streams.
struct StreamArtifacts {
  std::optional<TfidfVocabulary> semantic_vocab;
  std::optional<RandomForest> semantic_forest;
  std::optional<TfidfVocabulary> structural_vocab;
  std::optional<RandomForest> structural_forest;
  std::optional<Charset> charset;
  std::optional<CharCnn> char_cnn;
  std::shared_ptr<const ContextualEncoder> encoder;
  std::optional<ContextHead> context_head;

  // Throws DataError naming the first missing artifact.
  void require_complete() const;
};

StreamArtifacts train_streams(std::span<const PreparedMessage> messages, std::span<const int> targets,
                              const StreamConfig& config, std::uint64_t seed, std::size_t threads = 0);

// SEMANTIC and STRUCTURAL give TF-IDF vectors of their tagged text, CHAR the
// CNN's dense activation on the raw text, CONTEXTUAL the pooled encoding of
// the phrase-tagged text.
StreamFeatureSet extract_stream_features(const PreparedMessage& message, const StreamArtifacts& artifacts);

// Positive-class probability from the stream's own classifier.
double stream_probability(StreamId stream, const PreparedMessage& message,
                          const StreamArtifacts& artifacts);

}  // namespace smishing

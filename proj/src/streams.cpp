#include "smishing/streams.hpp"

#include <algorithm>
#include <thread>

#include "smishing/error.hpp"
#include "smishing/log.hpp"
#include "smishing/random.hpp"

namespace smishing {
namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
}

}  // namespace

TfidfConfig TfidfConfig::from_json(const nlohmann::json& j) {
  TfidfConfig c;
  try {
    c.min_df = j.value("min_df", c.min_df);
    c.max_features = j.value("max_features", c.max_features);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tfidf config: ") + e.what());
  }
  if (c.min_df == 0) throw ConfigError("tfidf min_df must be at least 1");
  return c;
}

nlohmann::json StreamConfig::to_json() const {
  return {{"tfidf", tfidf.to_json()},
          {"forest", forest.to_json()},
          {"char_cnn", char_cnn.to_json()},
          {"encoder", encoder.to_json()},
          {"context_head", context_head.to_json()}};
}

StreamConfig StreamConfig::from_json(const nlohmann::json& j) {
  StreamConfig c;
  if (!j.is_object()) throw ConfigError("stream config must be an object");
  if (j.contains("tfidf")) c.tfidf = TfidfConfig::from_json(j["tfidf"]);
  if (j.contains("forest")) c.forest = ForestConfig::from_json(j["forest"]);
  if (j.contains("char_cnn")) c.char_cnn = CharCnnConfig::from_json(j["char_cnn"]);
  if (j.contains("encoder")) c.encoder = ContextualEncoderSpec::from_json(j["encoder"]);
  if (j.contains("context_head")) c.context_head = ContextHeadConfig::from_json(j["context_head"]);
  return c;
}

PreparedMessage prepare(std::string_view text, const TaggingResources& resources) {
  PreparedMessage m;
  m.raw = std::string(text);
  m.semantic = tag_semantic(text, resources.gazetteer);
  m.structural = tag_structural(text);
  m.phrases = tag_phrases(text, resources.phrases);
  return m;
}

std::vector<PreparedMessage> prepare_all(std::span<const std::string> texts,
                                         const TaggingResources& resources, std::size_t threads) {
  std::vector<PreparedMessage> out(texts.size());
  parallel_for(texts.size(), threads, [&](std::size_t i) { out[i] = prepare(texts[i], resources); });
  return out;
}

void StreamArtifacts::require_complete() const {
  if (!semantic_vocab) throw DataError("missing artifact: semantic vocabulary");
  if (!semantic_forest) throw DataError("missing artifact: semantic forest");
  if (!structural_vocab) throw DataError("missing artifact: structural vocabulary");
  if (!structural_forest) throw DataError("missing artifact: structural forest");
  if (!charset) throw DataError("missing artifact: charset");
  if (!char_cnn) throw DataError("missing artifact: char CNN");
  if (!encoder) throw DataError("missing artifact: contextual encoder");
  if (!context_head) throw DataError("missing artifact: contextual head");
}

StreamArtifacts train_streams(std::span<const PreparedMessage> messages, std::span<const int> targets,
                              const StreamConfig& config, std::uint64_t seed, std::size_t threads) {
  if (messages.size() != targets.size()) throw DataError("stream training: message/target count mismatch");
  if (messages.empty()) throw DataError("stream training: no messages");
  StreamArtifacts a;
  const std::size_t n = messages.size();

  auto fit_text_stream = [&](StreamId id, auto view, std::optional<TfidfVocabulary>& vocab,
                             std::optional<RandomForest>& forest) {
    std::vector<std::string> docs;
    docs.reserve(n);
    for (const auto& m : messages) docs.push_back(view(m).tagged);
    vocab = TfidfVocabulary::fit(docs, config.tfidf.min_df, config.tfidf.max_features);
    std::vector<SparseVector> x;
    x.reserve(n);
    for (const auto& d : docs) x.push_back(vocab->transform(d));
    ForestConfig fc = config.forest;
    fc.seed = derive_seed(seed, static_cast<std::uint64_t>(id) + 1, config.forest.seed);
    if (fc.threads == 0) fc.threads = threads;
    forest = RandomForest::train(x, targets, fc);
    log::info(std::string(to_string(id)) + " stream: " + std::to_string(vocab->size()) + " terms");
  };
  fit_text_stream(StreamId::kSemantic, [](const PreparedMessage& m) -> const TaggedMessage& { return m.semantic; },
                  a.semantic_vocab, a.semantic_forest);
  fit_text_stream(StreamId::kStructural,
                  [](const PreparedMessage& m) -> const TaggedMessage& { return m.structural; },
                  a.structural_vocab, a.structural_forest);

  std::vector<std::string> raw;
  raw.reserve(n);
  for (const auto& m : messages) raw.push_back(m.raw);
  a.charset = Charset::build(raw, config.char_cnn.non_ascii_chars);
  std::vector<CharSequence> sequences;
  sequences.reserve(n);
  for (const auto& r : raw) sequences.push_back(encode_chars(r, config.char_cnn.max_len, *a.charset));
  a.char_cnn = CharCnn::train(sequences, targets, config.char_cnn, a.charset->size(),
                              derive_seed(seed, 3), threads);
  log::info("char stream: final loss " + std::to_string(a.char_cnn->history().epoch_loss.back()));

  a.encoder = make_encoder(config.encoder);
  std::vector<nn::RowMatrix> token_matrices(n);
  parallel_for(n, threads, [&](std::size_t i) {
    token_matrices[i] = a.encoder->encode(messages[i].phrases.tagged).tokens;
  });
  a.context_head = ContextHead::train(token_matrices, targets, config.context_head,
                                      config.encoder.token_dim, derive_seed(seed, 4), threads);
  log::info("contextual stream: final loss " + std::to_string(a.context_head->history().epoch_loss.back()));
  return a;
}

StreamFeatureSet extract_stream_features(const PreparedMessage& message, const StreamArtifacts& artifacts) {
  artifacts.require_complete();
  const auto& cc = artifacts.char_cnn->config();
  return {StreamFeatures{StreamId::kSemantic, artifacts.semantic_vocab->transform(message.semantic.tagged)},
          StreamFeatures{StreamId::kStructural,
                         artifacts.structural_vocab->transform(message.structural.tagged)},
          StreamFeatures{StreamId::kChar, artifacts.char_cnn->features(
                                              encode_chars(message.raw, cc.max_len, *artifacts.charset))},
          StreamFeatures{StreamId::kContextual, artifacts.encoder->encode(message.phrases.tagged).pooled}};
}

double stream_probability(StreamId stream, const PreparedMessage& message, const StreamArtifacts& artifacts) {
  artifacts.require_complete();
  switch (stream) {
    case StreamId::kSemantic:
      return artifacts.semantic_forest->predict(artifacts.semantic_vocab->transform(message.semantic.tagged));
    case StreamId::kStructural:
      return artifacts.structural_forest->predict(
          artifacts.structural_vocab->transform(message.structural.tagged));
    case StreamId::kChar:
      return artifacts.char_cnn->predict(
          encode_chars(message.raw, artifacts.char_cnn->config().max_len, *artifacts.charset));
    case StreamId::kContextual:
      return artifacts.context_head->predict(artifacts.encoder->encode(message.phrases.tagged).tokens);
  }
  throw DataError("unknown stream");
}

}  // namespace smishing

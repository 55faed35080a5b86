#pragma once

#include <filesystem>
#include <vector>

#include "smishing/pipeline.hpp"
#include "smishing/streams.hpp"
#include "smishing/synthetic.hpp"

namespace smishing::testing {

inline const TaggingResources& default_resources() {
  static const TaggingResources r{
      EntityGazetteer::load(std::filesystem::path(SMISHING_DATA_DIR) / "gazetteer.tsv"),
      PhraseLexicon::load(std::filesystem::path(SMISHING_DATA_DIR) / "legitimate_phrases.txt",
                          std::filesystem::path(SMISHING_DATA_DIR) / "smishing_phrases.txt")};
  return r;
}

// Small enough to train in a couple of seconds.
inline PipelineConfig small_config() {
  PipelineConfig c;
  c.streams.forest.trees = 20;
  c.streams.char_cnn.filters = 16;
  c.streams.char_cnn.hidden = 32;
  c.streams.char_cnn.epochs = 3;
  c.streams.context_head.filters = 8;
  c.streams.context_head.epochs = 3;
  c.fusion.k = 16;
  c.fusion.hidden = {32};
  c.fusion.epochs = 5;
  return c;
}

struct SmallRun {
  std::vector<PreparedMessage> train, test;
  std::vector<int> train_targets, test_targets;
  std::vector<std::string> test_texts;
};

inline SmallRun small_run(std::size_t size = 400, std::uint64_t seed = 7) {
  SyntheticConfig sc;
  sc.size = size;
  sc.seed = seed;
  const auto corpus = generate_synthetic(sc, default_resources());
  SmallRun run;
  for (std::size_t i = 0; i < corpus.messages.size(); ++i) {
    const auto& m = corpus.messages[i];
    const bool held_out = i % 5 == 0;
    (held_out ? run.test : run.train).push_back(prepare(m.text, default_resources()));
    (held_out ? run.test_targets : run.train_targets).push_back(m.binary_target);
    if (held_out) run.test_texts.push_back(m.text);
  }
  return run;
}

}  // namespace smishing::testing

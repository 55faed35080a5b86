#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smishing/corpus.hpp"
#include "smishing/fusion.hpp"
#include "smishing/streams.hpp"

namespace smishing {

// Four-signal benchmark corpus. Positives are split evenly into four groups,
// each carrying exactly one signal:
//   semantic    a mention of the UK
//   structural  a URL or phone number
//   char        a currency-symbol trigram that word tokenizers discard
//   contextual  a contiguous suspicious lexicon phrase
// Every message, positive or negative, also receives decoys at fixed rates:
// entity sentences naming other countries, e-mail addresses and short numbers, punctuation,
// scrambled lexicon words and benign phrases. Decoys never complete a signal.
struct SyntheticConfig {
  std::size_t size = 4000;
  double positive_rate = 0.4;
  std::uint64_t seed = 42;
  // Turns one signal into label-independent noise; its share of positives
  // goes to the other three groups.
  std::optional<StreamId> noise_signal;
};

struct SyntheticCorpus {
  std::vector<LabeledMessage> messages;
  // Signal carried by each message, or nullopt for negatives.
  std::vector<std::optional<StreamId>> signals;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config, const TaggingResources& resources);

// Whether a text carries a given signal, judged with the same taggers the
// pipeline uses.
bool has_signal(StreamId signal, std::string_view text, const TaggingResources& resources);

}  // namespace smishing

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "smishing/nn.hpp"

namespace smishing {

struct CharCnnConfig {
  std::size_t max_len = 160;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> widths{3, 5, 7};
  std::size_t filters = 64;
  std::size_t hidden = 128;
  double dropout = 0.3;
  std::size_t epochs = 4;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t non_ascii_chars = 64;

  // Throws ConfigError on inconsistent sizes.
  void validate() const;
  nlohmann::json to_json() const;
  static CharCnnConfig from_json(const nlohmann::json& j);
};

// Fixed-length character indices; 0 is padding, 1 unknown.
using CharSequence = std::vector<std::int32_t>;

class Charset {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Charset() = default;
  // symbols[i] receives index i + 2.
  explicit Charset(std::vector<char32_t> symbols);

  // Printable ASCII plus the most frequent non-ASCII codepoints of the
  // training texts (frequency ties broken by codepoint).
  static Charset build(std::span<const std::string> texts, std::size_t non_ascii);

  std::int32_t index_of(char32_t cp) const;
  std::size_t size() const { return symbols_.size() + 2; }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  // JSON array of UTF-8 strings, one per symbol, starting at index 2.
  nlohmann::json to_json() const;
  static Charset from_json(const nlohmann::json& j);

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, std::int32_t> index_;
};

// First max_len codepoints, right-padded with kPad. Never fails.
CharSequence encode_chars(std::string_view text, std::size_t max_len, const Charset& charset);

// embedding -> parallel convolutions with global max pooling -> dense ReLU
// with dropout -> sigmoid. The dense activation is the exported feature.
class CharCnn {
 public:
  CharCnn() = default;
  CharCnn(CharCnnConfig config, std::size_t vocab_size, std::uint64_t seed);
  // Wraps trained parameters; throws DataError on shape mismatch.
  CharCnn(CharCnnConfig config, std::size_t vocab_size, nn::ParameterSet params);

  static CharCnn train(std::span<const CharSequence> sequences, std::span<const int> targets,
                       const CharCnnConfig& config, std::size_t vocab_size, std::uint64_t seed,
                       std::size_t threads = 0);

  // Adds scale * dLoss/dParams to grads and returns the loss. Dropout is
  // applied only when training is set.
  double accumulate_gradient(const CharSequence& sequence, int target, nn::Gradients& grads,
                             double scale, std::uint64_t dropout_seed, bool training) const;
  double loss(const CharSequence& sequence, int target, std::uint64_t dropout_seed,
              bool training) const;

  nn::Vector features(const CharSequence& sequence) const;
  double predict(const CharSequence& sequence) const;

  const CharCnnConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t feature_dim() const { return config_.hidden; }
  const nn::ParameterSet& parameters() const { return params_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::TrainingHistory& history() const { return history_; }
  void set_history(nn::TrainingHistory history) { history_ = std::move(history); }

 private:
  struct Forward {
    nn::RowMatrix embedded;
    nn::ConvBank::Cache conv;
    nn::Vector pooled;
    nn::Vector hidden;  // post-ReLU, before dropout
    nn::Vector mask;
    double logit = 0.0;
  };

  void bind();
  void check_length(const CharSequence& sequence) const;
  void forward(const CharSequence& sequence, Forward& f, std::uint64_t dropout_seed,
               bool training, bool keep_cache) const;

  CharCnnConfig config_;
  std::size_t vocab_size_ = 0;
  nn::ParameterSet params_;
  nn::ConvBank conv_;
  std::size_t embedding_ = 0, dense_w_ = 0, dense_b_ = 0, out_w_ = 0, out_b_ = 0;
  nn::TrainingHistory history_;
};

}  // namespace smishing

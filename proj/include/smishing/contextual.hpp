#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smishing/nn.hpp"

namespace smishing {

struct ContextualEncoderSpec {
  std::string encoder_id = "hash-fallback-v1";
  std::size_t embedding_dim = 64;  // pooled vector length
  std::size_t token_dim = 64;      // token matrix width
  std::size_t max_tokens = 64;
  std::uint64_t seed = 0x5eed;

  void validate() const;
  nlohmann::json to_json() const;
  static ContextualEncoderSpec from_json(const nlohmann::json& j);
};

struct ContextualEncoding {
  nn::Vector pooled;
  nn::RowMatrix tokens;  // one row per token, token_dim columns
};

class ContextualEncoder {
 public:
  virtual ~ContextualEncoder() = default;
  virtual ContextualEncoding encode(std::string_view text) const = 0;
  virtual const ContextualEncoderSpec& spec() const = 0;
};

// Deterministic stand-in for a pretrained encoder. Each token maps to a unit
// vector drawn from splitmix64 seeded with fnv1a64(token) ^ seed; the pooled
// vector is the mean token vector times a fixed seeded projection whose
// entries are (2u - 1) / sqrt(token_dim), filled row by row from a splitmix64
// stream seeded with seed ^ 0x9E3779B97F4A7C15.
class HashEncoder final : public ContextualEncoder {
 public:
  explicit HashEncoder(ContextualEncoderSpec spec);
  ContextualEncoding encode(std::string_view text) const override;
  const ContextualEncoderSpec& spec() const override { return spec_; }

  nn::Vector token_vector(std::string_view token) const;
  const nn::Matrix& projection() const { return projection_; }

 private:
  ContextualEncoderSpec spec_;
  nn::Matrix projection_;
};

using EncoderFactory = std::function<std::unique_ptr<ContextualEncoder>(const ContextualEncoderSpec&)>;

// Makes a pretrained encoder available under an id.
void register_encoder(const std::string& encoder_id, EncoderFactory factory);

// Throws ConfigError for ids nobody registered.
std::unique_ptr<ContextualEncoder> make_encoder(const ContextualEncoderSpec& spec);

struct ContextHeadConfig {
  std::vector<std::size_t> widths{2, 3};
  std::size_t filters = 32;
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;

  void validate() const;
  nlohmann::json to_json() const;
  static ContextHeadConfig from_json(const nlohmann::json& j);
};

// Convolutions over the token axis, global max pool, one logit.
class ContextHead {
 public:
  ContextHead() = default;
  ContextHead(ContextHeadConfig config, std::size_t token_dim, std::uint64_t seed);
  ContextHead(ContextHeadConfig config, std::size_t token_dim, nn::ParameterSet params);

  static ContextHead train(std::span<const nn::RowMatrix> token_matrices, std::span<const int> targets,
                           const ContextHeadConfig& config, std::size_t token_dim,
                           std::uint64_t seed, std::size_t threads = 0);

  double accumulate_gradient(const nn::RowMatrix& tokens, int target, nn::Gradients& grads,
                             double scale) const;
  double loss(const nn::RowMatrix& tokens, int target) const;
  double predict(const nn::RowMatrix& tokens) const;

  const ContextHeadConfig& config() const { return config_; }
  std::size_t token_dim() const { return token_dim_; }
  const nn::ParameterSet& parameters() const { return params_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::TrainingHistory& history() const { return history_; }
  void set_history(nn::TrainingHistory history) { history_ = std::move(history); }

 private:
  void bind();
  // Zero-pads short inputs so every filter width fits.
  nn::RowMatrix padded(const nn::RowMatrix& tokens) const;
  double logit(const nn::RowMatrix& input, nn::ConvBank::Cache* cache, nn::Vector* pooled) const;

  ContextHeadConfig config_;
  std::size_t token_dim_ = 0;
  nn::ParameterSet params_;
  nn::ConvBank conv_;
  std::size_t out_w_ = 0, out_b_ = 0;
  nn::TrainingHistory history_;
};

}  // namespace smishing

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smishing/nn.hpp"

namespace smishing {

enum class StreamId { kSemantic = 0, kStructural = 1, kChar = 2, kContextual = 3 };

inline constexpr std::size_t kStreamCount = 4;
inline constexpr std::array<StreamId, kStreamCount> kStreamOrder{
    StreamId::kSemantic, StreamId::kStructural, StreamId::kChar, StreamId::kContextual};

std::string_view to_string(StreamId id);
StreamId parse_stream_id(std::string_view name);

using StreamMask = std::array<bool, kStreamCount>;
inline constexpr StreamMask kAllStreams{true, true, true, true};

struct StreamBlock {
  StreamId stream = StreamId::kSemantic;
  nn::Vector values;
};

// Concatenates four k-length blocks in the pinned stream order. Throws
// DataError on a wrong count, order or length.
nn::Vector fuse(std::span<const StreamBlock> blocks, std::size_t k);

struct FusionConfig {
  std::size_t k = 64;
  std::vector<std::size_t> hidden{256, 64};
  double dropout = 0.3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
};

struct FusionOutput {
  double probability = 0.0;
  std::array<double, kStreamCount> attention{};
};

// Per-stream scalar gates s_i = w_i . block_i + b_i, softmax over the active
// streams, each block scaled by n_active * alpha_i, then an MLP with ReLU and
// dropout ending in a sigmoid. Inactive streams are zeroed and excluded from
// the softmax.
class FusionModel {
 public:
  FusionModel() = default;
  FusionModel(FusionConfig config, StreamMask active, std::uint64_t seed);
  FusionModel(FusionConfig config, StreamMask active, nn::ParameterSet params);

  static FusionModel train(std::span<const nn::Vector> fused, std::span<const int> targets,
                           const FusionConfig& config, StreamMask active = kAllStreams,
                           std::size_t threads = 0);

  double accumulate_gradient(const nn::Vector& fused, int target, nn::Gradients& grads, double scale,
                             std::uint64_t dropout_seed, bool training) const;
  double loss(const nn::Vector& fused, int target, std::uint64_t dropout_seed, bool training) const;
  FusionOutput predict(const nn::Vector& fused) const;

  const FusionConfig& config() const { return config_; }
  const StreamMask& active() const { return active_; }
  std::size_t input_size() const { return config_.k * kStreamCount; }
  const nn::ParameterSet& parameters() const { return params_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::TrainingHistory& history() const { return history_; }
  void set_history(nn::TrainingHistory history) { history_ = std::move(history); }

 private:
  struct Forward {
    std::array<double, kStreamCount> alpha{};
    nn::Vector gated;
    std::vector<nn::Vector> hidden;  // post-ReLU, before dropout
    std::vector<nn::Vector> masks;
    double logit = 0.0;
  };

  void bind();
  void forward(const nn::Vector& fused, Forward& f, std::uint64_t dropout_seed, bool training) const;

  FusionConfig config_;
  StreamMask active_ = kAllStreams;
  nn::ParameterSet params_;
  std::size_t gate_w_ = 0, gate_b_ = 0, out_w_ = 0, out_b_ = 0;
  std::vector<std::size_t> layer_w_, layer_b_;
  nn::TrainingHistory history_;
};

}  // namespace smishing

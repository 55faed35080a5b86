#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smishing/fusion.hpp"
#include "smishing/streams.hpp"
#include "smishing/svd.hpp"

namespace smishing {

struct PipelineConfig {
  StreamConfig streams;
  FusionConfig fusion;

  nlohmann::json to_json() const { return {{"streams", streams.to_json()}, {"fusion", fusion.to_json()}}; }
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct Prediction {
  double probability = 0.0;
  int label = 0;
  std::array<double, kStreamCount> attention{};
  std::vector<TagSpan> tags;
  std::vector<std::string> countries;

  nlohmann::json to_json() const;
};

// Everything needed for inference: tagging resources, stream artifacts, one
// projection per stream and the fusion model.
class Pipeline {
 public:
  // When train_fused is set it receives the fused training vectors.
  static Pipeline train(std::span<const PreparedMessage> messages, std::span<const int> targets,
                        TaggingResources resources, const PipelineConfig& config, std::uint64_t seed,
                        std::size_t threads = 0, std::vector<nn::Vector>* train_fused = nullptr);

  Pipeline(TaggingResources resources, PipelineConfig config, std::uint64_t seed, StreamArtifacts streams,
           std::array<SvdProjection, kStreamCount> projections, FusionModel fusion);

  nn::Vector fused(const StreamFeatureSet& features) const;
  nn::Vector fused(const PreparedMessage& message) const;

  Prediction classify(std::string_view text) const;
  Prediction classify(const PreparedMessage& message) const;

  double threshold() const { return config_.fusion.threshold; }
  void set_threshold(double threshold);

  const TaggingResources& resources() const { return resources_; }
  const PipelineConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const StreamArtifacts& streams() const { return streams_; }
  const std::array<SvdProjection, kStreamCount>& projections() const { return projections_; }
  const FusionModel& fusion() const { return fusion_; }

 private:
  TaggingResources resources_;
  PipelineConfig config_;
  std::uint64_t seed_ = 0;
  StreamArtifacts streams_;
  std::array<SvdProjection, kStreamCount> projections_;
  FusionModel fusion_;
};

}  // namespace smishing

#include "smishing/pipeline.hpp"

#include <algorithm>
#include <thread>

#include "smishing/error.hpp"
#include "smishing/log.hpp"
#include "smishing/random.hpp"

namespace smishing {

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be an object");
  PipelineConfig c;
  if (j.contains("streams")) c.streams = StreamConfig::from_json(j["streams"]);
  if (j.contains("fusion")) c.fusion = FusionConfig::from_json(j["fusion"]);
  return c;
}

nlohmann::json Prediction::to_json() const {
  nlohmann::json attn = nlohmann::json::object();
  for (std::size_t i = 0; i < kStreamCount; ++i) attn[std::string(to_string(kStreamOrder[i]))] = attention[i];
  nlohmann::json t = nlohmann::json::array();
  for (const auto& s : tags) t.push_back({{"tag", s.tag}, {"surface", s.surface}, {"start", s.start}, {"end", s.end}});
  return {{"probability", probability}, {"label", label}, {"attention", attn}, {"tags", t},
          {"countries", countries}};
}

Pipeline::Pipeline(TaggingResources resources, PipelineConfig config, std::uint64_t seed,
                   StreamArtifacts streams, std::array<SvdProjection, kStreamCount> projections,
                   FusionModel fusion)
    : resources_(std::move(resources)),
      config_(std::move(config)),
      seed_(seed),
      streams_(std::move(streams)),
      projections_(std::move(projections)),
      fusion_(std::move(fusion)) {
  streams_.require_complete();
  for (const auto& p : projections_) {
    if (p.k != config_.fusion.k) throw DataError("projection width differs from fusion k");
  }
}

Pipeline Pipeline::train(std::span<const PreparedMessage> messages, std::span<const int> targets,
                         TaggingResources resources, const PipelineConfig& config, std::uint64_t seed,
                         std::size_t threads, std::vector<nn::Vector>* train_fused) {
  config.fusion.validate();
  auto streams = train_streams(messages, targets, config.streams, seed, threads);

  const std::size_t n = messages.size();
  std::vector<StreamFeatureSet> features(n);
  {
    std::size_t workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += workers) features[i] = extract_stream_features(messages[i], streams);
      });
    }
  }

  std::array<SvdProjection, kStreamCount> projections;
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    SvdOptions options;
    options.seed = derive_seed(seed, 0x737664, s);
    if (std::holds_alternative<SparseVector>(features[0][s].values)) {
      std::vector<SparseVector> x;
      x.reserve(n);
      for (const auto& f : features) x.push_back(std::get<SparseVector>(f[s].values));
      projections[s] = fit_projection(std::span<const SparseVector>(x), config.fusion.k, options);
    } else {
      const auto d = std::get<nn::Vector>(features[0][s].values).size();
      nn::Matrix x(static_cast<Eigen::Index>(n), d);
      for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) = std::get<nn::Vector>(features[i][s].values).transpose();
      projections[s] = fit_projection(x, config.fusion.k, options);
    }
    projections[s].round_to_float();
    log::info(std::string(to_string(kStreamOrder[s])) + " projection: " +
              (projections[s].pass_through ? "pass-through" : "svd"));
  }

  Pipeline pipeline(std::move(resources), config, seed, std::move(streams), std::move(projections),
                    FusionModel{});
  std::vector<nn::Vector> fused(n);
  for (std::size_t i = 0; i < n; ++i) fused[i] = pipeline.fused(features[i]);
  FusionConfig fc = config.fusion;
  fc.seed = derive_seed(seed, 0x667573, config.fusion.seed);
  pipeline.fusion_ = FusionModel::train(fused, targets, fc, kAllStreams, threads);
  if (train_fused) *train_fused = std::move(fused);
  return pipeline;
}

nn::Vector Pipeline::fused(const StreamFeatureSet& features) const {
  std::vector<StreamBlock> blocks;
  blocks.reserve(kStreamCount);
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    nn::Vector v = std::visit([&](const auto& x) { return projections_[s].project(x); }, features[s].values);
    blocks.push_back({features[s].stream, std::move(v)});
  }
  return fuse(blocks, config_.fusion.k);
}

nn::Vector Pipeline::fused(const PreparedMessage& message) const {
  return fused(extract_stream_features(message, streams_));
}

Prediction Pipeline::classify(std::string_view text) const { return classify(prepare(text, resources_)); }

Prediction Pipeline::classify(const PreparedMessage& message) const {
  const auto out = fusion_.predict(fused(message));
  Prediction p;
  p.probability = out.probability;
  p.label = out.probability >= threshold() ? 1 : 0;
  p.attention = out.attention;
  for (const auto* view : {&message.structural, &message.semantic, &message.phrases}) {
    p.tags.insert(p.tags.end(), view->spans.begin(), view->spans.end());
  }
  std::stable_sort(p.tags.begin(), p.tags.end(),
                   [](const TagSpan& a, const TagSpan& b) { return a.start < b.start; });
  p.countries = message.semantic.appended_countries;
  return p;
}

void Pipeline::set_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("decision threshold must be in (0, 1)");
  config_.fusion.threshold = threshold;
}

}  // namespace smishing

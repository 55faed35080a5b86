#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smishing/corpus.hpp"
#include "smishing/pipeline.hpp"

namespace smishing {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t n() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // undefined when only one class is present
  std::size_t n = 0;
  double threshold = 0.5;
  ConfusionMatrix confusion;

  nlohmann::json to_json() const;
};

// A score at or above the threshold predicts the positive class.
Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);

// Probability that a random positive outscores a random negative, ties
// counted one half. Exact pair counting up to 10^4 samples, rank sums above.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);
std::optional<double> auc_pairwise(std::span<const double> scores, std::span<const int> labels);
std::optional<double> auc_rank_sum(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  std::map<StreamId, Metrics> streams;
  Metrics combined;

  nlohmann::json to_json() const;
  // Five rows: one per stream, then the combined model.
  std::string table() const;
};

Metrics evaluate_stream(StreamId stream, std::span<const PreparedMessage> messages,
                        std::span<const int> targets, const StreamArtifacts& artifacts, double threshold);

EvalReport evaluate(const Pipeline& pipeline, std::span<const PreparedMessage> messages,
                    std::span<const int> targets, std::size_t threads = 0);

struct AblationReport {
  Metrics full;
  std::map<StreamId, Metrics> removed;
  std::map<StreamId, double> deltas;  // full accuracy minus ablated accuracy
  std::uint64_t seed = 0;
  std::string mode;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Trains the full pipeline, then four fusion variants each with one stream
// zeroed and excluded from the attention softmax. Stream extractors and
// projections depend only on their own stream and the shared seed, so they
// are reused rather than refitted; every variant uses the full model's seeds.
AblationReport run_ablation(std::span<const PreparedMessage> train, std::span<const int> train_targets,
                            std::span<const PreparedMessage> test, std::span<const int> test_targets,
                            const TaggingResources& resources, const PipelineConfig& config,
                            std::uint64_t seed, std::size_t threads = 0);

// Fusion-only variant used by run_ablation, given an already trained
// pipeline and its fused training vectors.
AblationReport ablate_fusion(const Pipeline& pipeline, std::span<const nn::Vector> train_fused,
                             std::span<const int> train_targets, std::span<const PreparedMessage> test,
                             std::span<const int> test_targets, std::size_t threads = 0);

struct CountryCounts {
  std::size_t smishing = 0;
  std::size_t other = 0;
  bool operator==(const CountryCounts&) const = default;
};

// Messages mentioning each gazetteer country, split by binary target.
std::map<std::string, CountryCounts> country_label_cooccurrence(std::span<const LabeledMessage> messages,
                                                                const EntityGazetteer& gazetteer);

// model,epoch,loss rows.
void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, nn::TrainingHistory>>& histories);

}  // namespace smishing

#include "smishing/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "smishing/error.hpp"

namespace smishing {
namespace {

constexpr std::size_t kPairwiseLimit = 10000;

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string row(const std::string& name, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %8s %10s\n", name.c_str(), percent(m.accuracy).c_str(),
                percent(m.precision).c_str(), percent(m.recall).c_str(), fixed3(m.f1).c_str(),
                m.auc ? percent(*m.auc).c_str() : "n/a");
  return buf;
}

std::string header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %8s %10s\n", "Model", "Accuracy", "Precision",
                "Recall", "F1", "AUC");
  return buf;
}

std::string display_name(StreamId id) {
  switch (id) {
    case StreamId::kSemantic:
      return "Semantic (TF-IDF+RF)";
    case StreamId::kStructural:
      return "Structural (TF-IDF+RF)";
    case StreamId::kChar:
      return "Char-Level (CharCNN)";
    case StreamId::kContextual:
      return "Contextual (Enc+CNN)";
  }
  return "?";
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
}

}  // namespace

nlohmann::json Metrics::to_json() const {
  return {{"accuracy", accuracy},
          {"precision", precision},
          {"recall", recall},
          {"f1", f1},
          {"auc", auc ? nlohmann::json(*auc) : nlohmann::json()},
          {"n", n},
          {"threshold", threshold},
          {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}}};
}

std::optional<double> auc_pairwise(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) return std::nullopt;
  // Twice the win count, so ties stay integral.
  std::uint64_t doubled = 0;
  for (double p : pos) {
    for (double q : neg) doubled += p > q ? 2 : (p == q ? 1 : 0);
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::optional<double> auc_rank_sum(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Doubled mid-ranks are integers, which keeps the sum exact.
  std::uint64_t doubled_rank_sum = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled_mid = i + j + 1;  // 2 * average of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        doubled_rank_sum += doubled_mid;
        ++positives;
      }
    }
    i = j;
  }
  const std::uint64_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  return scores.size() <= kPairwiseLimit ? auc_pairwise(scores, labels) : auc_rank_sum(scores, labels);
}

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_sizes(scores, labels);
  if (scores.empty()) throw DataError("metrics need at least one sample");
  Metrics m;
  m.threshold = threshold;
  m.n = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.confusion.tp;
    else if (predicted) ++m.confusion.fp;
    else if (actual) ++m.confusion.fn;
    else ++m.confusion.tn;
  }
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(m.n);
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.auc = auc(scores, labels);
  return m;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [id, m] : streams) s[std::string(to_string(id))] = m.to_json();
  return {{"streams", s}, {"combined", combined.to_json()}};
}

std::string EvalReport::table() const {
  std::string out = header();
  for (const auto& [id, m] : streams) out += row(display_name(id), m);
  out += row("Combined (fusion)", combined);
  return out;
}

Metrics evaluate_stream(StreamId stream, std::span<const PreparedMessage> messages, std::span<const int> targets,
                        const StreamArtifacts& artifacts, double threshold) {
  artifacts.require_complete();
  std::vector<double> scores(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) scores[i] = stream_probability(stream, messages[i], artifacts);
  return compute_metrics(scores, targets, threshold);
}

EvalReport evaluate(const Pipeline& pipeline, std::span<const PreparedMessage> messages,
                    std::span<const int> targets, std::size_t threads) {
  const std::size_t n = messages.size();
  std::array<std::vector<double>, kStreamCount> stream_scores;
  for (auto& s : stream_scores) s.resize(n);
  std::vector<double> combined(n);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t s = 0; s < kStreamCount; ++s) {
      stream_scores[s][i] = stream_probability(kStreamOrder[s], messages[i], pipeline.streams());
    }
    combined[i] = pipeline.classify(messages[i]).probability;
  });
  EvalReport report;
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    report.streams[kStreamOrder[s]] = compute_metrics(stream_scores[s], targets, pipeline.threshold());
  }
  report.combined = compute_metrics(combined, targets, pipeline.threshold());
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json r = nlohmann::json::object();
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [id, m] : removed) r[std::string(to_string(id))] = m.to_json();
  for (const auto& [id, v] : deltas) d[std::string(to_string(id))] = v;
  return {{"full", full.to_json()}, {"removed", r}, {"accuracy_deltas", d}, {"seed", seed}, {"mode", mode}};
}

std::string AblationReport::table() const {
  std::string out = header();
  out += row("All four streams", full);
  for (const auto& [id, m] : removed) out += row("without " + std::string(to_string(id)), m);
  out += "\nAccuracy drop when removed:\n";
  for (const auto& [id, v] : deltas) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "  %-12s %+.2f points\n", std::string(to_string(id)).c_str(), 100.0 * v);
    out += buf;
  }
  return out;
}

AblationReport ablate_fusion(const Pipeline& pipeline, std::span<const nn::Vector> train_fused,
                             std::span<const int> train_targets, std::span<const PreparedMessage> test,
                             std::span<const int> test_targets, std::size_t threads) {
  std::vector<nn::Vector> test_fused(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) { test_fused[i] = pipeline.fused(test[i]); });
  auto score = [&](const FusionModel& model) {
    std::vector<double> s(test_fused.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = model.predict(test_fused[i]).probability;
    return compute_metrics(s, test_targets, pipeline.threshold());
  };
  AblationReport report;
  report.seed = pipeline.seed();
  report.mode = "fusion-retrain";
  report.full = score(pipeline.fusion());
  // Same seed and epochs as the full model.
  FusionConfig fc = pipeline.fusion().config();
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    StreamMask mask = kAllStreams;
    mask[s] = false;
    const auto model = FusionModel::train(train_fused, train_targets, fc, mask, threads);
    const auto id = kStreamOrder[s];
    report.removed[id] = score(model);
    report.deltas[id] = report.full.accuracy - report.removed[id].accuracy;
  }
  return report;
}

AblationReport run_ablation(std::span<const PreparedMessage> train, std::span<const int> train_targets,
                            std::span<const PreparedMessage> test, std::span<const int> test_targets,
                            const TaggingResources& resources, const PipelineConfig& config, std::uint64_t seed,
                            std::size_t threads) {
  std::vector<nn::Vector> train_fused;
  const auto pipeline = Pipeline::train(train, train_targets, resources, config, seed, threads, &train_fused);
  return ablate_fusion(pipeline, train_fused, train_targets, test, test_targets, threads);
}

std::map<std::string, CountryCounts> country_label_cooccurrence(std::span<const LabeledMessage> messages,
                                                                const EntityGazetteer& gazetteer) {
  std::map<std::string, CountryCounts> table;
  for (const auto& m : messages) {
    const auto tagged = tag_semantic(m.text, gazetteer);
    const std::set<std::string> countries(tagged.appended_countries.begin(), tagged.appended_countries.end());
    for (const auto& c : countries) {
      auto& counts = table[c];
      (m.binary_target == 1 ? counts.smishing : counts.other)++;
    }
  }
  return table;
}

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, nn::TrainingHistory>>& histories) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "model,epoch,loss\n";
  for (const auto& [name, h] : histories) {
    for (std::size_t e = 0; e < h.epoch_loss.size(); ++e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", h.epoch_loss[e]);
      out << name << ',' << e + 1 << ',' << buf << '\n';
    }
  }
}

}  // namespace smishing

#include "smishing/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "smishing/error.hpp"
#include "smishing/random.hpp"

namespace smishing {
namespace {

struct ColumnEntry {
  std::uint32_t sample;
  double value;
};

// Training matrix in both row and column layout.
struct TrainingData {
  std::span<const SparseVector> rows;
  std::span<const int> targets;
  std::vector<std::vector<ColumnEntry>> columns;
  std::size_t dimension = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingData& data, const ForestConfig& config, std::uint64_t seed)
      : data_(data), config_(config), rng_(seed) {
    const std::size_t n = data.rows.size();
    weight_.assign(n, 0.0);
    stamp_.assign(n, 0);
    value_.assign(n, 0.0);
    features_.resize(data.dimension);
    for (std::size_t f = 0; f < features_.size(); ++f) features_[f] = static_cast<std::uint32_t>(f);
    mtry_ = config.max_features > 0
                ? std::min(config.max_features, data.dimension)
                : std::max<std::size_t>(1, static_cast<std::size_t>(
                                               std::sqrt(static_cast<double>(data.dimension))));
  }

  DecisionTree build() {
    const std::size_t n = data_.rows.size();
    const auto draws = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config_.subsample * static_cast<double>(n))));
    std::vector<std::uint32_t> root;
    if (config_.bootstrap) {
      for (std::size_t i = 0; i < draws; ++i) weight_[rng_.below(n)] += 1.0;
    } else if (draws >= n) {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    } else {
      std::vector<std::uint32_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
      rng_.shuffle(std::span<std::uint32_t>(order));
      for (std::size_t i = 0; i < draws; ++i) weight_[order[i]] = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (weight_[i] > 0.0) root.push_back(static_cast<std::uint32_t>(i));
    }

    struct Work {
      std::int32_t node;
      std::vector<std::uint32_t> samples;
      std::size_t depth;
    };
    std::vector<Work> stack;
    nodes_.push_back({});
    stack.push_back({0, std::move(root), 0});
    while (!stack.empty()) {
      Work work = std::move(stack.back());
      stack.pop_back();
      std::array<double, 2> counts{0.0, 0.0};
      for (auto s : work.samples) counts[data_.targets[s] ? 1 : 0] += weight_[s];
      const double total = counts[0] + counts[1];
      TreeNode& node = nodes_[work.node];
      node.class_fractions = {counts[0] / total, counts[1] / total};
      const bool depth_limited = config_.max_depth > 0 && work.depth >= config_.max_depth;
      if (counts[0] == 0.0 || counts[1] == 0.0 || depth_limited ||
          total < 2.0 * static_cast<double>(config_.min_leaf)) {
        continue;
      }
      Split split = find_split(work.samples, counts);
      if (split.feature < 0) continue;

      std::vector<std::uint32_t> left;
      std::vector<std::uint32_t> right;
      mark(work.samples);
      gather(static_cast<std::uint32_t>(split.feature), work.samples);
      for (auto s : work.samples) (value_[s] <= split.threshold ? left : right).push_back(s);
      clear_values();

      const auto left_id = static_cast<std::int32_t>(nodes_.size());
      nodes_.push_back({});
      nodes_.push_back({});
      TreeNode& parent = nodes_[work.node];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left_id;
      parent.right = left_id + 1;
      stack.push_back({left_id + 1, std::move(right), work.depth + 1});
      stack.push_back({left_id, std::move(left), work.depth + 1});
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  void mark(const std::vector<std::uint32_t>& samples) {
    ++current_stamp_;
    for (auto s : samples) stamp_[s] = current_stamp_;
  }

  // Fills value_ and touched_ with the node's nonzero entries for a feature.
  void gather(std::uint32_t feature, const std::vector<std::uint32_t>& samples) {
    const auto& column = data_.columns[feature];
    if (column.size() <= 8 * samples.size()) {
      for (const auto& e : column) {
        if (stamp_[e.sample] == current_stamp_) {
          value_[e.sample] = e.value;
          touched_.push_back(e.sample);
        }
      }
    } else {
      for (auto s : samples) {
        const double v = data_.rows[s].at(feature);
        if (v != 0.0) {
          value_[s] = v;
          touched_.push_back(s);
        }
      }
    }
  }

  void clear_values() {
    for (auto s : touched_) value_[s] = 0.0;
    touched_.clear();
  }

  static double impurity_sum(double a, double b) {
    const double n = a + b;
    return n > 0.0 ? n - (a * a + b * b) / n : 0.0;
  }

  Split find_split(const std::vector<std::uint32_t>& samples, const std::array<double, 2>& counts) {
    mark(samples);
    Split best;
    best.score = impurity_sum(counts[0], counts[1]);
    bool found = false;
    const double min_leaf = static_cast<double>(config_.min_leaf);
    std::size_t evaluated = 0;
    std::vector<std::pair<double, std::uint32_t>> sorted;
    for (std::size_t k = 0; k < features_.size() && evaluated < mtry_; ++k) {
      std::swap(features_[k], features_[k + rng_.below(features_.size() - k)]);
      const std::uint32_t f = features_[k];
      gather(f, samples);
      if (touched_.empty()) continue;  // constant zero in this node
      sorted.clear();
      std::array<double, 2> nonzero{0.0, 0.0};
      for (auto s : touched_) {
        sorted.emplace_back(value_[s], s);
        nonzero[data_.targets[s] ? 1 : 0] += weight_[s];
      }
      clear_values();
      std::sort(sorted.begin(), sorted.end());
      const std::array<double, 2> zeros{counts[0] - nonzero[0], counts[1] - nonzero[1]};
      const bool has_zeros = zeros[0] + zeros[1] > 0.0;
      if (!has_zeros && sorted.front().first == sorted.back().first) continue;
      ++evaluated;

      // Sweep values in ascending order with the implicit zero block placed
      // between negative and positive entries.
      std::array<double, 2> left{0.0, 0.0};
      bool zeros_added = !has_zeros;
      double previous = 0.0;
      bool have_previous = false;
      auto consider = [&](double next_value) {
        if (!have_previous || next_value == previous) return;
        const double left_total = left[0] + left[1];
        const double right_total = counts[0] + counts[1] - left_total;
        if (left_total < min_leaf || right_total < min_leaf) return;
        const double score = impurity_sum(left[0], left[1]) +
                             impurity_sum(counts[0] - left[0], counts[1] - left[1]);
        if (!found || score < best.score) {
          double threshold = previous + (next_value - previous) / 2.0;
          if (threshold >= next_value) threshold = previous;
          best = {static_cast<std::int32_t>(f), threshold, score};
          found = true;
        }
      };
      for (const auto& [value, s] : sorted) {
        if (!zeros_added && value > 0.0) {
          consider(0.0);
          left[0] += zeros[0];
          left[1] += zeros[1];
          previous = 0.0;
          have_previous = true;
          zeros_added = true;
        }
        consider(value);
        left[data_.targets[s] ? 1 : 0] += weight_[s];
        previous = value;
        have_previous = true;
      }
      if (!zeros_added) consider(0.0);
    }
    if (!found || best.score > impurity_sum(counts[0], counts[1])) return {};
    return best;
  }

  const TrainingData& data_;
  const ForestConfig& config_;
  Rng rng_;
  std::size_t mtry_ = 1;
  std::vector<double> weight_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t current_stamp_ = 0;
  std::vector<double> value_;
  std::vector<std::uint32_t> touched_;
  std::vector<std::uint32_t> features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

nlohmann::json ForestConfig::to_json() const {
  return {{"trees", trees},         {"max_features", max_features}, {"min_leaf", min_leaf},
          {"max_depth", max_depth}, {"bootstrap", bootstrap},       {"subsample", subsample},
          {"hard_vote", hard_vote}, {"seed", seed}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.trees = j.value("trees", c.trees);
  c.max_features = j.value("max_features", c.max_features);
  c.min_leaf = j.value("min_leaf", c.min_leaf);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.subsample = j.value("subsample", c.subsample);
  c.hard_vote = j.value("hard_vote", c.hard_vote);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (c.trees == 0 || c.min_leaf == 0 || !(c.subsample > 0.0 && c.subsample <= 1.0)) {
    throw ConfigError("forest: trees and min_leaf must be positive, subsample in (0, 1]");
  }
  return c;
}

const TreeNode& DecisionTree::leaf_for(const SparseVector& x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(x.at(static_cast<std::size_t>(node.feature)) <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes_[i];
}

RandomForest RandomForest::train(std::span<const SparseVector> features,
                                 std::span<const int> targets, const ForestConfig& config) {
  if (features.size() != targets.size()) {
    throw DataError("forest: feature and target counts differ");
  }
  if (features.size() < 2) throw DataError("forest: need at least two samples");
  const bool has_pos = std::find(targets.begin(), targets.end(), 1) != targets.end();
  const bool has_neg = std::find(targets.begin(), targets.end(), 0) != targets.end();
  if (!has_pos || !has_neg) throw DataError("forest: training targets contain a single class");
  if (config.trees == 0) throw ConfigError("forest: trees must be positive");

  TrainingData data{features, targets, {}, features.front().dimension};
  if (data.dimension == 0) throw DataError("forest: zero-dimensional features");
  data.columns.resize(data.dimension);
  for (std::size_t s = 0; s < features.size(); ++s) {
    if (features[s].dimension != data.dimension) {
      throw DataError("forest: inconsistent feature dimensions");
    }
    for (const auto& [i, v] : features[s].entries) {
      if (v != 0.0) data.columns[i].push_back({static_cast<std::uint32_t>(s), v});
    }
  }

  RandomForest forest;
  forest.config_ = config;
  forest.dimension_ = data.dimension;
  forest.trees_.resize(config.trees);
  const std::size_t threads = std::max<std::size_t>(
      1, std::min(config.trees, config.threads ? config.threads
                                               : std::max(1u, std::thread::hardware_concurrency())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < config.trees; t = next++) {
      TreeBuilder builder(data, config, derive_seed(config.seed, t, 0x7265));
      forest.trees_[t] = builder.build();
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return forest;
}

double RandomForest::predict(const SparseVector& x) const {
  if (x.dimension != dimension_) {
    throw DataError("forest: expected dimension " + std::to_string(dimension_) + ", got " +
                    std::to_string(x.dimension));
  }
  if (trees_.empty()) throw DataError("forest: model has no trees");
  double sum = 0.0;
  for (const auto& tree : trees_) {
    const auto& leaf = tree.leaf_for(x);
    sum += config_.hard_vote ? (leaf.class_fractions[1] > 0.5 ? 1.0 : 0.0) : leaf.class_fractions[1];
  }
  return sum / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   fractions = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      fractions.push_back({n.class_fractions[0], n.class_fractions[1]});
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"class_fractions", fractions}});
  }
  return {{"dimension", dimension_}, {"config", config_.to_json()}, {"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest forest;
  try {
    forest.dimension_ = j.at("dimension").get<std::size_t>();
    forest.config_ = ForestConfig::from_json(j.at("config"));
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<std::int32_t>>();
      const auto right = t.at("right").get<std::vector<std::int32_t>>();
      const auto fractions = t.at("class_fractions").get<std::vector<std::array<double, 2>>>();
      const std::size_t n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
          fractions.size() != n) {
        throw DataError("forest: inconsistent tree arrays");
      }
      std::vector<TreeNode> nodes(n);
      for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = {feature[i], threshold[i], left[i], right[i], fractions[i]};
        if (feature[i] >= 0) {
          const auto valid = [&](std::int32_t c) {
            return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(n);
          };
          if (static_cast<std::size_t>(feature[i]) >= forest.dimension_ || !valid(left[i]) ||
              !valid(right[i])) {
            throw DataError("forest: corrupt node " + std::to_string(i));
          }
        }
      }
      forest.trees_.emplace_back(std::move(nodes));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("forest: malformed model: ") + e.what());
  }
  if (forest.trees_.empty()) throw DataError("forest: model has no trees");
  return forest;
}

}  // namespace smishing

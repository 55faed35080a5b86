#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "smishing/tfidf.hpp"

namespace smishing {

struct ForestConfig {
  std::size_t trees = 200;
  // Feature candidates per split; 0 selects floor(sqrt(dimension)).
  std::size_t max_features = 0;
  std::size_t min_leaf = 1;
  std::size_t max_depth = 0;  // 0 = grow until pure
  bool bootstrap = true;      // sample with replacement
  double subsample = 1.0;     // sample size as a fraction of the training set
  bool hard_vote = false;     // count leaf majorities instead of averaging fractions
  std::uint64_t seed = 0;
  std::size_t threads = 0;    // 0 = hardware concurrency

  nlohmann::json to_json() const;
  static ForestConfig from_json(const nlohmann::json& j);
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<double, 2> class_fractions{0.0, 0.0};
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const TreeNode& leaf_for(const SparseVector& x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

// Bagged CART ensemble with Gini splits over sparse non-negative features.
class RandomForest {
 public:
  static RandomForest train(std::span<const SparseVector> features, std::span<const int> targets,
                            const ForestConfig& config);

  // Probability of the positive class.
  double predict(const SparseVector& x) const;

  std::size_t dimension() const { return dimension_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  ForestConfig config_;
  std::size_t dimension_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace smishing

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace smishing {

// Sparse vector with entries sorted by index.
struct SparseVector {
  std::size_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double at(std::size_t index) const;
  double norm() const;

  bool operator==(const SparseVector&) const = default;
};

// Term vocabulary with smoothed inverse document frequencies:
//   idf(t) = ln((1 + N) / (1 + df(t))) + 1
// Transformed vectors hold raw count * idf, L2 normalised.
class TfidfVocabulary {
 public:
  // max_features == 0 means unlimited. When capping, terms with the highest
  // document frequency are kept, ties broken lexicographically. Indices are
  // assigned in lexicographic term order.
  static TfidfVocabulary fit(std::span<const std::string> documents, std::size_t min_df = 1,
                             std::size_t max_features = 0);

  SparseVector transform(std::string_view document) const;

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  // Index of a term, or -1 when out of vocabulary.
  std::ptrdiff_t index_of(std::string_view term) const;

  std::size_t min_df() const { return min_df_; }
  std::size_t max_features() const { return max_features_; }

  nlohmann::json to_json() const;
  static TfidfVocabulary from_json(const nlohmann::json& j);

 private:
  void rebuild_index();

  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_df_ = 1;
  std::size_t max_features_ = 0;
};

}  // namespace smishing

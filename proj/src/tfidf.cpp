#include "smishing/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "smishing/error.hpp"
#include "smishing/text.hpp"

namespace smishing {

double SparseVector::at(std::size_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::size_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& [i, v] : entries) sum += v * v;
  return std::sqrt(sum);
}

TfidfVocabulary TfidfVocabulary::fit(std::span<const std::string> documents, std::size_t min_df,
                                     std::size_t max_features) {
  if (documents.empty()) throw DataError("tfidf: no training documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    const auto tokens = text::tokenize(doc);
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end())) ++df[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [term, count] : df) {
    if (count >= min_df) kept.emplace_back(term, count);
  }
  if (kept.empty()) throw DataError("tfidf: vocabulary is empty after min_df filtering");
  if (max_features > 0 && kept.size() > max_features) {
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    kept.resize(max_features);
    std::sort(kept.begin(), kept.end());
  }

  TfidfVocabulary v;
  v.min_df_ = min_df;
  v.max_features_ = max_features;
  const double n = static_cast<double>(documents.size());
  for (const auto& [term, count] : kept) {
    v.terms_.push_back(term);
    v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  v.rebuild_index();
  return v;
}

void TfidfVocabulary::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], i);
}

std::ptrdiff_t TfidfVocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

SparseVector TfidfVocabulary::transform(std::string_view document) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : text::tokenize(document)) {
    auto it = index_.find(t);
    if (it != index_.end()) counts[static_cast<std::uint32_t>(it->second)] += 1.0;
  }
  SparseVector out;
  out.dimension = terms_.size();
  double sum = 0.0;
  for (const auto& [i, c] : counts) {
    const double value = c * idf_[i];
    out.entries.emplace_back(i, value);
    sum += value * value;
  }
  if (sum > 0.0) {
    const double inv = 1.0 / std::sqrt(sum);
    for (auto& e : out.entries) e.second *= inv;
  }
  return out;
}

nlohmann::json TfidfVocabulary::to_json() const {
  nlohmann::json terms = nlohmann::json::object();
  for (std::size_t i = 0; i < terms_.size(); ++i) terms[terms_[i]] = i;
  return {{"terms", terms}, {"idf", idf_}, {"min_df", min_df_}, {"max_features", max_features_}};
}

TfidfVocabulary TfidfVocabulary::from_json(const nlohmann::json& j) {
  TfidfVocabulary v;
  try {
    v.idf_ = j.at("idf").get<std::vector<double>>();
    v.terms_.assign(v.idf_.size(), {});
    std::vector<bool> seen(v.idf_.size(), false);
    for (const auto& [term, index] : j.at("terms").items()) {
      const auto i = index.get<std::size_t>();
      if (i >= v.terms_.size() || seen[i]) throw DataError("tfidf: corrupt term index");
      v.terms_[i] = term;
      seen[i] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw DataError("tfidf: term indices are not dense");
    }
    v.min_df_ = j.value("min_df", std::size_t{1});
    v.max_features_ = j.value("max_features", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tfidf: malformed vocabulary: ") + e.what());
  }
  v.rebuild_index();
  return v;
}

}  // namespace smishing

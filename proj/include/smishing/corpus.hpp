#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace smishing {

enum class TernaryLabel { kHam = 0, kSpam = 1, kSmishing = 2 };

std::string_view to_string(TernaryLabel label);
TernaryLabel parse_ternary_label(std::string_view name);

struct RawRecord {
  std::string source_id;
  std::size_t row_index = 0;
  std::string text;
  std::string original_label;
};

struct LabeledMessage {
  std::string id;
  std::string text;
  TernaryLabel ternary_label = TernaryLabel::kHam;
  int binary_target = 0;
  std::string source_id;

  bool operator==(const LabeledMessage&) const = default;
};

// Content id of a normalized message text.
std::string message_id(std::string_view normalized_text);

// Builds a message from already-normalized text, deriving id and target.
LabeledMessage make_message(std::string text, TernaryLabel label, std::string source_id);

enum class MatchMode { kWholeWord, kSubstring };

class KeywordLexicon {
 public:
  KeywordLexicon(std::string name, std::set<std::string> entries,
                 MatchMode mode = MatchMode::kWholeWord);

  // One keyword per line; blank lines and lines starting with '#' are skipped.
  static KeywordLexicon load(const std::filesystem::path& path,
                             MatchMode mode = MatchMode::kWholeWord);

  bool matches(std::string_view text) const;

  const std::string& name() const { return name_; }
  const std::set<std::string>& entries() const { return entries_; }
  MatchMode match_mode() const { return mode_; }

 private:
  std::string name_;
  std::set<std::string> entries_;
  MatchMode mode_;
};

// source_id -> (source label -> ternary label). Source labels are matched
// after trimming and ASCII lowercasing.
using LabelMap = std::map<std::string, std::map<std::string, TernaryLabel>>;

enum class DatasetFormat { kCsv, kJsonl };

// Column selector: a zero-based index (CSV) or a column/field name.
using ColumnRef = std::variant<std::size_t, std::string>;

struct DatasetSchema {
  std::string source_id;
  DatasetFormat format = DatasetFormat::kCsv;
  char delimiter = ',';
  bool header = false;
  ColumnRef text_column = std::size_t{1};
  ColumnRef label_column = std::size_t{0};
  std::map<std::string, TernaryLabel> label_map;

  // Parses {"source_id", "format", "delimiter", "header", "text", "label",
  // "label_map"}.
  static DatasetSchema from_json(const nlohmann::json& j);
};

struct IngestResult {
  std::vector<RawRecord> records;
  std::size_t rejected = 0;
};

// Reads one dataset file. Rows with an empty or missing text field are
// rejected and counted.
IngestResult ingest_dataset(const std::filesystem::path& path, const DatasetSchema& schema);

// RFC 4180 style reader: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view data, char delimiter);

std::string normalize_text(std::string_view text);
LabeledMessage normalize(const RawRecord& record, const LabelMap& label_map);

// SPAM messages matching the lexicon become SMISHING. Input is not modified.
std::vector<LabeledMessage> relabel_spam(std::span<const LabeledMessage> messages,
                                         const KeywordLexicon& lexicon);

struct DuplicateConflict {
  std::string id;
  TernaryLabel kept;
  TernaryLabel dropped;
};

// First occurrence of each id wins; conflicting labels resolve to the most
// severe one (SMISHING > SPAM > HAM). Conflicts are logged and, when
// requested, reported.
std::vector<LabeledMessage> dedupe(std::span<const LabeledMessage> messages,
                                   std::vector<DuplicateConflict>* conflicts = nullptr);

struct CorpusSplit {
  std::vector<LabeledMessage> train;
  std::vector<LabeledMessage> test;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

CorpusSplit split(std::span<const LabeledMessage> messages, double train_fraction,
                  std::uint64_t seed, bool stratify);

struct CorpusStats {
  std::size_t total = 0;
  std::map<TernaryLabel, std::size_t> per_label;
  std::map<std::string, std::size_t> per_source;
  double positive_rate = 0.0;

  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(std::span<const LabeledMessage> messages);

void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const LabeledMessage> messages);
std::vector<LabeledMessage> read_corpus_jsonl(const std::filesystem::path& path);

nlohmann::json to_json(const LabeledMessage& m);
LabeledMessage message_from_json(const nlohmann::json& j);

}  // namespace smishing

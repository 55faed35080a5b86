#include "smishing/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "smishing/error.hpp"
#include "smishing/hash.hpp"
#include "smishing/log.hpp"
#include "smishing/random.hpp"
#include "smishing/text.hpp"

namespace smishing {
namespace {

std::string trim_ascii(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

int severity(TernaryLabel label) { return static_cast<int>(label); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ColumnRef column_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("dataset schema missing '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
    return v.get<std::size_t>();
  }
  if (v.is_string()) return v.get<std::string>();
  throw ConfigError(std::string("dataset schema field '") + key +
                    "' must be a column index or a name");
}

bool whole_word_contains(std::u32string_view haystack, std::u32string_view needle) {
  if (needle.empty()) return false;
  std::size_t pos = haystack.find(needle);
  while (pos != std::u32string_view::npos) {
    const bool left_ok = pos == 0 || !text::is_word_char(haystack[pos - 1]) ||
                         !text::is_word_char(needle.front());
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !text::is_word_char(haystack[end]) ||
                          !text::is_word_char(needle.back());
    if (left_ok && right_ok) return true;
    pos = haystack.find(needle, pos + 1);
  }
  return false;
}

}  // namespace

std::string_view to_string(TernaryLabel label) {
  switch (label) {
    case TernaryLabel::kHam: return "HAM";
    case TernaryLabel::kSpam: return "SPAM";
    case TernaryLabel::kSmishing: return "SMISHING";
  }
  return "HAM";
}

TernaryLabel parse_ternary_label(std::string_view name) {
  const std::string upper = [&] {
    std::string s(name);
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }();
  if (upper == "HAM") return TernaryLabel::kHam;
  if (upper == "SPAM") return TernaryLabel::kSpam;
  if (upper == "SMISHING") return TernaryLabel::kSmishing;
  throw ConfigError("unknown ternary label '" + std::string(name) + "'");
}

std::string message_id(std::string_view normalized_text) {
  return sha256_hex(normalized_text).substr(0, 32);
}

LabeledMessage make_message(std::string text, TernaryLabel label, std::string source_id) {
  LabeledMessage m;
  m.id = message_id(text);
  m.text = std::move(text);
  m.ternary_label = label;
  m.binary_target = label == TernaryLabel::kSmishing ? 1 : 0;
  m.source_id = std::move(source_id);
  return m;
}

KeywordLexicon::KeywordLexicon(std::string name, std::set<std::string> entries, MatchMode mode)
    : name_(std::move(name)), entries_(std::move(entries)), mode_(mode) {
  if (entries_.empty()) throw ConfigError("keyword lexicon '" + name_ + "' is empty");
  for (const auto& e : entries_) {
    if (trim_ascii(e).empty()) {
      throw ConfigError("keyword lexicon '" + name_ + "' has a blank entry");
    }
    if (text::ascii_lower(e) != e) {
      throw ConfigError("keyword lexicon '" + name_ + "' entry '" + e + "' is not lowercase");
    }
  }
}

KeywordLexicon KeywordLexicon::load(const std::filesystem::path& path, MatchMode mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open keyword lexicon " + path.string());
  std::set<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    const std::string entry = trim_ascii(line);
    if (entry.empty() || entry.front() == '#') continue;
    entries.insert(text::ascii_lower(entry));
  }
  return KeywordLexicon(path.stem().string(), std::move(entries), mode);
}

bool KeywordLexicon::matches(std::string_view message) const {
  const std::string lowered = text::ascii_lower(message);
  if (mode_ == MatchMode::kSubstring) {
    return std::any_of(entries_.begin(), entries_.end(), [&](const std::string& e) {
      return lowered.find(e) != std::string::npos;
    });
  }
  const std::u32string haystack = text::decode_utf8(lowered);
  return std::any_of(entries_.begin(), entries_.end(), [&](const std::string& e) {
    return whole_word_contains(haystack, text::decode_utf8(e));
  });
}

DatasetSchema DatasetSchema::from_json(const nlohmann::json& j) {
  DatasetSchema s;
  if (!j.is_object()) throw ConfigError("dataset schema must be a JSON object");
  s.source_id = j.value("source_id", std::string());
  if (s.source_id.empty()) throw ConfigError("dataset schema missing 'source_id'");
  const std::string format = j.value("format", std::string("csv"));
  if (format == "csv") {
    s.format = DatasetFormat::kCsv;
  } else if (format == "jsonl") {
    s.format = DatasetFormat::kJsonl;
  } else {
    throw ConfigError("dataset '" + s.source_id + "': unknown format '" + format + "'");
  }
  const std::string delim = j.value("delimiter", std::string(","));
  if (delim == "\\t" || delim == "tab") {
    s.delimiter = '\t';
  } else if (delim.size() == 1) {
    s.delimiter = delim[0];
  } else {
    throw ConfigError("dataset '" + s.source_id + "': delimiter must be one character");
  }
  s.header = j.value("header", false);
  s.text_column = column_from_json(j, "text");
  s.label_column = column_from_json(j, "label");
  if (s.format == DatasetFormat::kJsonl &&
      (!std::holds_alternative<std::string>(s.text_column) ||
       !std::holds_alternative<std::string>(s.label_column))) {
    throw ConfigError("dataset '" + s.source_id + "': JSONL schemas name fields by string");
  }
  if (!j.contains("label_map") || !j.at("label_map").is_object()) {
    throw ConfigError("dataset '" + s.source_id + "': missing 'label_map' object");
  }
  for (const auto& [raw, mapped] : j.at("label_map").items()) {
    s.label_map[text::ascii_lower(trim_ascii(raw))] =
        parse_ternary_label(mapped.get<std::string>());
  }
  return s;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view data, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < data.size() && data[i + 1] == '\n') continue;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

IngestResult ingest_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  if (!std::filesystem::exists(path)) {
    throw DataError("dataset '" + schema.source_id + "': missing file " + path.string());
  }
  const std::string data = read_file(path);
  IngestResult result;
  auto accept = [&](std::size_t row_index, std::string text, std::string label) {
    if (trim_ascii(text).empty() || text::collapse_whitespace(text).empty()) {
      ++result.rejected;
      return;
    }
    result.records.push_back({schema.source_id, row_index, std::move(text), std::move(label)});
  };

  if (schema.format == DatasetFormat::kCsv) {
    auto rows = parse_csv(data, schema.delimiter);
    std::size_t first = 0;
    auto text_idx = std::get_if<std::size_t>(&schema.text_column);
    auto label_idx = std::get_if<std::size_t>(&schema.label_column);
    std::size_t text_col = text_idx ? *text_idx : 0;
    std::size_t label_col = label_idx ? *label_idx : 0;
    if (schema.header) {
      if (rows.empty()) throw DataError("dataset '" + schema.source_id + "': empty file");
      const auto& head = rows.front();
      auto resolve = [&](const ColumnRef& ref, std::size_t& out) {
        if (const auto* name = std::get_if<std::string>(&ref)) {
          auto it = std::find(head.begin(), head.end(), *name);
          if (it == head.end()) {
            throw ConfigError("dataset '" + schema.source_id + "': no column named '" + *name +
                              "'");
          }
          out = static_cast<std::size_t>(it - head.begin());
        }
      };
      resolve(schema.text_column, text_col);
      resolve(schema.label_column, label_col);
      first = 1;
    } else if (!text_idx || !label_idx) {
      throw ConfigError("dataset '" + schema.source_id +
                        "': named columns require header=true");
    }
    for (std::size_t r = first; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (text_col >= row.size() || label_col >= row.size()) {
        ++result.rejected;
        continue;
      }
      accept(r - first, row[text_col], row[label_col]);
    }
  } else {
    const auto& text_key = std::get<std::string>(schema.text_column);
    const auto& label_key = std::get<std::string>(schema.label_column);
    std::istringstream lines(data);
    std::string line;
    std::size_t row_index = 0;
    while (std::getline(lines, line)) {
      if (trim_ascii(line).empty()) continue;
      const std::size_t idx = row_index++;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains(text_key) ||
          !j.contains(label_key) || !j.at(text_key).is_string()) {
        ++result.rejected;
        continue;
      }
      const auto& lv = j.at(label_key);
      accept(idx, j.at(text_key).get<std::string>(),
             lv.is_string() ? lv.get<std::string>() : lv.dump());
    }
  }
  if (result.rejected > 0) {
    log::warning("dataset '" + schema.source_id + "': rejected " +
                 std::to_string(result.rejected) + " unusable rows");
  }
  if (result.records.empty()) {
    throw DataError("dataset '" + schema.source_id + "': zero usable rows in " + path.string());
  }
  return result;
}

std::string normalize_text(std::string_view text) { return text::collapse_whitespace(text); }

LabeledMessage normalize(const RawRecord& record, const LabelMap& label_map) {
  auto source = label_map.find(record.source_id);
  if (source == label_map.end()) {
    throw DataError("no label map for source '" + record.source_id + "'");
  }
  auto label = source->second.find(text::ascii_lower(trim_ascii(record.original_label)));
  if (label == source->second.end()) {
    throw DataError("source '" + record.source_id + "': unmapped label '" +
                    record.original_label + "'");
  }
  return make_message(normalize_text(record.text), label->second, record.source_id);
}

std::vector<LabeledMessage> relabel_spam(std::span<const LabeledMessage> messages,
                                         const KeywordLexicon& lexicon) {
  std::vector<LabeledMessage> out(messages.begin(), messages.end());
  for (auto& m : out) {
    if (m.ternary_label == TernaryLabel::kSpam && lexicon.matches(m.text)) {
      m.ternary_label = TernaryLabel::kSmishing;
      m.binary_target = 1;
    }
  }
  return out;
}

std::vector<LabeledMessage> dedupe(std::span<const LabeledMessage> messages,
                                   std::vector<DuplicateConflict>* conflicts) {
  std::vector<LabeledMessage> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& m : messages) {
    auto [it, inserted] = seen.emplace(m.id, out.size());
    if (inserted) {
      out.push_back(m);
      continue;
    }
    LabeledMessage& kept = out[it->second];
    if (kept.ternary_label == m.ternary_label) continue;
    DuplicateConflict conflict{m.id, kept.ternary_label, m.ternary_label};
    if (severity(m.ternary_label) > severity(kept.ternary_label)) {
      std::swap(conflict.kept, conflict.dropped);
      kept.ternary_label = m.ternary_label;
      kept.binary_target = m.binary_target;
    }
    log::info("duplicate " + m.id + ": labels " + std::string(to_string(conflict.kept)) +
              " and " + std::string(to_string(conflict.dropped)) + ", kept " +
              std::string(to_string(conflict.kept)));
    if (conflicts) conflicts->push_back(conflict);
  }
  return out;
}

CorpusSplit split(std::span<const LabeledMessage> messages, double train_fraction,
                  std::uint64_t seed, bool stratify) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (messages.size() < 5) throw DataError("corpus too small to split (need at least 5)");

  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  auto take = [&](std::vector<std::size_t> pool) {
    rng.shuffle(std::span<std::size_t>(pool));
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(pool.size())));
    train_idx.insert(train_idx.end(), pool.begin(), pool.begin() + n_train);
    test_idx.insert(test_idx.end(), pool.begin() + n_train, pool.end());
    return n_train;
  };

  if (stratify) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < messages.size(); ++i) {
      (messages[i].binary_target == 1 ? pos : neg).push_back(i);
    }
    const std::size_t n_pos = pos.size();
    const std::size_t n_neg = neg.size();
    const std::size_t pos_train = take(std::move(pos));
    const std::size_t neg_train = take(std::move(neg));
    if (pos_train == 0 || pos_train == n_pos || neg_train == 0 || neg_train == n_neg) {
      throw DataError(
          "corpus too small for a stratified split: each side needs a positive and a "
          "negative");
    }
    rng.shuffle(std::span<std::size_t>(train_idx));
    rng.shuffle(std::span<std::size_t>(test_idx));
  } else {
    std::vector<std::size_t> all(messages.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    take(std::move(all));
  }

  CorpusSplit out;
  out.seed = seed;
  out.train_fraction = train_fraction;
  out.train.reserve(train_idx.size());
  out.test.reserve(test_idx.size());
  for (auto i : train_idx) out.train.push_back(messages[i]);
  for (auto i : test_idx) out.test.push_back(messages[i]);
  return out;
}

nlohmann::json CorpusStats::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  for (auto label : {TernaryLabel::kHam, TernaryLabel::kSpam, TernaryLabel::kSmishing}) {
    auto it = per_label.find(label);
    j["per_label"][std::string(smishing::to_string(label))] =
        it == per_label.end() ? 0 : it->second;
  }
  j["per_source"] = nlohmann::json::object();
  for (const auto& [source, count] : per_source) j["per_source"][source] = count;
  j["positive_rate"] = positive_rate;
  return j;
}

CorpusStats corpus_stats(std::span<const LabeledMessage> messages) {
  CorpusStats s;
  for (auto label : {TernaryLabel::kHam, TernaryLabel::kSpam, TernaryLabel::kSmishing}) {
    s.per_label[label] = 0;
  }
  std::size_t positives = 0;
  for (const auto& m : messages) {
    ++s.total;
    ++s.per_label[m.ternary_label];
    ++s.per_source[m.source_id];
    positives += static_cast<std::size_t>(m.binary_target);
  }
  s.positive_rate = s.total == 0 ? 0.0 : static_cast<double>(positives) / s.total;
  return s;
}

nlohmann::json to_json(const LabeledMessage& m) {
  return {{"id", m.id},
          {"text", m.text},
          {"ternary_label", std::string(to_string(m.ternary_label))},
          {"binary_target", m.binary_target},
          {"source_id", m.source_id}};
}

LabeledMessage message_from_json(const nlohmann::json& j) {
  LabeledMessage m;
  try {
    m.text = j.at("text").get<std::string>();
    m.ternary_label = parse_ternary_label(j.at("ternary_label").get<std::string>());
    m.source_id = j.value("source_id", std::string());
    m.id = j.contains("id") ? j.at("id").get<std::string>() : message_id(m.text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed corpus record: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed corpus record: ") + e.what());
  }
  m.binary_target = m.ternary_label == TernaryLabel::kSmishing ? 1 : 0;
  if (j.contains("binary_target") && j.at("binary_target") != m.binary_target) {
    throw DataError("corpus record " + m.id + ": binary_target contradicts ternary_label");
  }
  return m;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const LabeledMessage> messages) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& m : messages) out << to_json(m).dump() << '\n';
}

std::vector<LabeledMessage> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::vector<LabeledMessage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ascii(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    }
    out.push_back(message_from_json(j));
  }
  return out;
}

}  // namespace smishing

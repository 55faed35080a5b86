#include "smishing/tagging.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include <boost/regex.hpp>

#include "smishing/error.hpp"
#include "smishing/hash.hpp"
#include "smishing/text.hpp"

namespace smishing {
namespace {

// A candidate tag region in codepoint offsets.
struct Region {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string tag;
};

bool overlaps(const Region& a, std::size_t begin, std::size_t end) {
  return a.begin < end && begin < a.end;
}

bool overlaps_any(const std::vector<Region>& regions, std::size_t begin, std::size_t end) {
  return std::any_of(regions.begin(), regions.end(),
                     [&](const Region& r) { return overlaps(r, begin, end); });
}

void insert_sorted(std::vector<Region>& regions, Region r) {
  auto it = std::lower_bound(regions.begin(), regions.end(), r.begin,
                             [](const Region& a, std::size_t b) { return a.begin < b; });
  regions.insert(it, std::move(r));
}

// Shared view of a message: codepoints plus byte offsets of each codepoint.
class Text {
 public:
  explicit Text(std::string_view s)
      : bytes_(s), cps_(text::decode_utf8(s)), offsets_(text::codepoint_offsets(s)) {
    cp_at_byte_.assign(bytes_.size() + 1, 0);
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
      for (std::size_t b = offsets_[i]; b < offsets_[i + 1]; ++b) cp_at_byte_[b] = i;
    }
    cp_at_byte_[bytes_.size()] = cps_.size();
  }

  const std::string& bytes() const { return bytes_; }
  const std::u32string& cps() const { return cps_; }
  std::size_t size() const { return cps_.size(); }
  std::size_t byte_of(std::size_t cp) const { return offsets_[cp]; }
  std::size_t cp_of(std::size_t byte) const { return cp_at_byte_[byte]; }

  std::string slice(std::size_t begin, std::size_t end) const {
    return bytes_.substr(offsets_[begin], offsets_[end] - offsets_[begin]);
  }

 private:
  std::string bytes_;
  std::u32string cps_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> cp_at_byte_;
};

const boost::regex& placeholder_regex() {
  static const boost::regex re(R"(\[[A-Za-z_]+\]|country=[A-Za-z_]+)");
  return re;
}

// Existing placeholder tokens and country suffixes never re-match.
std::vector<Region> protected_regions(const Text& t) {
  std::vector<Region> out;
  const char* base = t.bytes().data();
  for (boost::cregex_iterator it(base, base + t.bytes().size(), placeholder_regex()), end;
       it != end; ++it) {
    const auto b = static_cast<std::size_t>((*it)[0].first - base);
    const auto e = static_cast<std::size_t>((*it)[0].second - base);
    out.push_back({t.cp_of(b), t.cp_of(e), {}});
  }
  return out;
}

// Codepoint ranges not covered by any region. Regions must be sorted.
std::vector<std::pair<std::size_t, std::size_t>> free_segments(
    std::size_t n, const std::vector<Region>& taken) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t cursor = 0;
  for (const auto& r : taken) {
    if (r.begin > cursor) out.emplace_back(cursor, r.begin);
    cursor = std::max(cursor, r.end);
  }
  if (cursor < n) out.emplace_back(cursor, n);
  return out;
}

template <typename Accept>
std::vector<Region> regex_matches(const Text& t, const boost::regex& re,
                                  const std::vector<Region>& taken, std::string_view tag,
                                  Accept&& accept) {
  std::vector<Region> found;
  const char* base = t.bytes().data();
  for (auto [seg_begin, seg_end] : free_segments(t.size(), taken)) {
    const char* first = base + t.byte_of(seg_begin);
    const char* last = base + t.byte_of(seg_end);
    for (boost::cregex_iterator it(first, last, re), end; it != end; ++it) {
      if ((*it)[0].length() == 0) continue;
      if (!accept(*it)) continue;
      const auto b = static_cast<std::size_t>((*it)[0].first - base);
      const auto e = static_cast<std::size_t>((*it)[0].second - base);
      found.push_back({t.cp_of(b), t.cp_of(e), std::string(tag)});
    }
  }
  return found;
}

std::vector<Region> regex_matches(const Text& t, const boost::regex& re,
                                  const std::vector<Region>& taken, std::string_view tag) {
  return regex_matches(t, re, taken, tag, [](const boost::cmatch&) { return true; });
}

bool boundary_ok(const std::u32string& cps, std::size_t begin, std::size_t end) {
  const bool left = begin == 0 || !text::is_word_char(cps[begin]) ||
                    !text::is_word_char(cps[begin - 1]);
  const bool right = end == cps.size() || !text::is_word_char(cps[end - 1]) ||
                     !text::is_word_char(cps[end]);
  return left && right;
}

TaggedMessage build_substituted(const Text& t, const std::vector<Region>& regions) {
  TaggedMessage out;
  out.original = t.bytes();
  out.mode = TagMode::kSubstitute;
  std::size_t cursor = 0;
  for (const auto& r : regions) {
    out.tagged += t.slice(cursor, r.begin);
    out.tagged += r.tag;
    out.spans.push_back({r.begin, r.end, r.tag, t.slice(r.begin, r.end)});
    cursor = r.end;
  }
  out.tagged += t.slice(cursor, t.size());
  return out;
}

const boost::regex& url_regex() {
  static const boost::regex re(std::string(patterns::kUrl), boost::regex::perl | boost::regex::icase);
  return re;
}
const boost::regex& email_regex() {
  static const boost::regex re(std::string(patterns::kEmail), boost::regex::perl);
  return re;
}
const boost::regex& phone_regex() {
  static const boost::regex re(std::string(patterns::kPhone), boost::regex::perl);
  return re;
}
const boost::regex& money_regex() {
  static const boost::regex re(std::string(patterns::kMoney),
                               boost::regex::perl | boost::regex::icase);
  return re;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string entry = trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    out.push_back(std::move(entry));
  }
  return out;
}

bool token_safe(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  });
}

}  // namespace

std::string patterns::fingerprint() {
  std::string joined(kVersion);
  for (auto p : {kUrl, kEmail, kPhone, kMoney}) {
    joined.push_back('\n');
    joined.append(p);
  }
  return sha256_hex(joined);
}

std::string reconstruct(const TaggedMessage& message) {
  std::u32string tagged = text::decode_utf8(message.tagged);
  std::u32string suffix;
  for (const auto& c : message.appended_countries) {
    suffix += U" ";
    suffix += text::decode_utf8(std::string(tags::kCountryPrefix) + c);
  }
  if (!suffix.empty()) {
    if (!std::u32string_view(tagged).ends_with(suffix)) {
      throw Error("reconstruct: country suffix not found");
    }
    tagged.resize(tagged.size() - suffix.size());
  }

  std::u32string out;
  std::size_t cursor = 0;      // position in tagged
  std::ptrdiff_t shift = 0;    // tagged offset minus original offset
  std::size_t previous_end = 0;
  for (const auto& span : message.spans) {
    if (span.start >= span.end || span.start < previous_end) {
      throw Error("reconstruct: spans must be non-empty, sorted and disjoint");
    }
    const std::u32string tag = text::decode_utf8(span.tag);
    const std::u32string surface = text::decode_utf8(span.surface);
    const auto at = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(span.start) + shift);
    if (at < cursor || at > tagged.size()) throw Error("reconstruct: span out of range");
    out.append(tagged, cursor, at - cursor);
    if (message.mode == TagMode::kSubstitute) {
      if (tagged.compare(at, tag.size(), tag) != 0) {
        throw Error("reconstruct: tag " + span.tag + " not at expected offset");
      }
      if (surface.size() != span.end - span.start) {
        throw Error("reconstruct: surface length disagrees with span");
      }
      out += surface;
      cursor = at + tag.size();
      shift += static_cast<std::ptrdiff_t>(tag.size()) -
               static_cast<std::ptrdiff_t>(span.end - span.start);
    } else {
      const std::u32string marker = tag + U" ";
      if (tagged.compare(at, marker.size(), marker) != 0 ||
          tagged.compare(at + marker.size(), surface.size(), surface) != 0) {
        throw Error("reconstruct: annotation " + span.tag + " not at expected offset");
      }
      cursor = at + marker.size();
      shift += static_cast<std::ptrdiff_t>(marker.size());
    }
    previous_end = span.end;
  }
  out.append(tagged, cursor, std::u32string::npos);
  return text::encode_utf8(out);
}

TaggedMessage tag_structural(std::string_view input) {
  const Text t(input);
  std::vector<Region> taken = protected_regions(t);
  const std::vector<Region> emails_in_full = regex_matches(t, email_regex(), {}, tags::kEmail);

  // Bare-domain URL matches that sit inside an e-mail address are left for
  // the e-mail pass ("a@b.co" is an address, not a link to "b.co").
  auto urls = regex_matches(t, url_regex(), taken, tags::kUrl, [&](const boost::cmatch& m) {
    if (!m[3].matched) return true;
    const auto b = t.cp_of(static_cast<std::size_t>(m[0].first - t.bytes().data()));
    const auto e = t.cp_of(static_cast<std::size_t>(m[0].second - t.bytes().data()));
    return !overlaps_any(emails_in_full, b, e);
  });
  for (auto& r : urls) insert_sorted(taken, std::move(r));
  for (auto& r : regex_matches(t, email_regex(), taken, tags::kEmail)) {
    insert_sorted(taken, std::move(r));
  }
  auto phones = regex_matches(t, phone_regex(), taken, tags::kPhone);
  for (auto& r : phones) insert_sorted(taken, std::move(r));

  std::vector<Region> substituted;
  for (const auto& r : taken) {
    if (!r.tag.empty()) substituted.push_back(r);
  }
  return build_substituted(t, substituted);
}

EntityGazetteer::EntityGazetteer(std::vector<GazetteerEntry> entries)
    : entries_(std::move(entries)) {
  for (auto& e : entries_) {
    if (trim(e.surface).empty()) throw ConfigError("gazetteer: empty surface form");
    if (e.canonical.empty()) e.canonical = e.surface;
    if (e.type == EntityType::kGpe && !token_safe(e.canonical)) {
      throw ConfigError("gazetteer: country name '" + e.canonical +
                        "' must match [A-Za-z_]+");
    }
  }
}

EntityGazetteer EntityGazetteer::parse(std::string_view contents) {
  std::vector<GazetteerEntry> entries;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw ConfigError("gazetteer line " + std::to_string(lineno) +
                        ": expected TYPE<TAB>surface<TAB>canonical");
    }
    GazetteerEntry e;
    if (fields[0] == "GPE") {
      e.type = EntityType::kGpe;
    } else if (fields[0] == "ORG") {
      e.type = EntityType::kOrg;
    } else {
      throw ConfigError("gazetteer line " + std::to_string(lineno) + ": unknown type '" +
                        fields[0] + "'");
    }
    e.surface = trim(fields[1]);
    e.canonical = fields.size() == 3 ? trim(fields[2]) : e.surface;
    entries.push_back(std::move(e));
  }
  return EntityGazetteer(std::move(entries));
}

EntityGazetteer EntityGazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open gazetteer " + path.string());
  return parse(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

std::string EntityGazetteer::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.type == EntityType::kGpe ? "GPE" : "ORG";
    out += '\t';
    out += e.surface;
    out += '\t';
    out += e.canonical;
    out += '\n';
  }
  return out;
}

TaggedMessage GazetteerTagger::tag(std::string_view input) const {
  const Text t(input);
  std::vector<Region> taken = protected_regions(t);
  for (auto& r : regex_matches(t, money_regex(), taken, tags::kMoney)) {
    insert_sorted(taken, std::move(r));
  }

  struct Candidate {
    std::size_t begin, end, entry;
  };
  std::vector<Candidate> candidates;
  const std::u32string& cps = t.cps();
  const std::u32string lowered = text::ascii_lower(cps);
  const auto& entries = gazetteer_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::u32string surface = text::decode_utf8(entries[i].surface);
    const bool case_sensitive = surface.size() <= 2;
    const std::u32string& hay = case_sensitive ? cps : lowered;
    const std::u32string needle = case_sensitive ? surface : text::ascii_lower(surface);
    for (auto pos = hay.find(needle); pos != std::u32string::npos; pos = hay.find(needle, pos + 1)) {
      const std::size_t end = pos + needle.size();
      // Entities touching a money match or placeholder are skipped: after
      // substitution the neighbour changes, which would break idempotence.
      if (!boundary_ok(cps, pos, end) || overlaps_any(taken, pos == 0 ? 0 : pos - 1, end + 1)) {
        continue;
      }
      candidates.push_back({pos, end, i});
    }
  }
  // Longest first, then earlier gazetteer position, then leftmost.
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    const auto la = a.end - a.begin;
    const auto lb = b.end - b.begin;
    if (la != lb) return la > lb;
    if (a.entry != b.entry) return a.entry < b.entry;
    return a.begin < b.begin;
  });
  std::vector<Region> chosen_entities;
  std::vector<std::size_t> chosen_entry;
  for (const auto& c : candidates) {
    if (overlaps_any(chosen_entities, c.begin, c.end)) continue;
    chosen_entities.push_back(
        {c.begin, c.end,
         std::string(entries[c.entry].type == EntityType::kGpe ? tags::kGpe : tags::kOrg)});
    chosen_entry.push_back(c.entry);
  }

  std::vector<std::pair<std::size_t, std::size_t>> countries;  // begin, entry
  for (std::size_t i = 0; i < chosen_entities.size(); ++i) {
    if (entries[chosen_entry[i]].type == EntityType::kGpe) {
      countries.emplace_back(chosen_entities[i].begin, chosen_entry[i]);
    }
    insert_sorted(taken, chosen_entities[i]);
  }
  std::sort(countries.begin(), countries.end());

  std::vector<Region> substituted;
  for (const auto& r : taken) {
    if (!r.tag.empty()) substituted.push_back(r);
  }
  TaggedMessage out = build_substituted(t, substituted);
  for (const auto& [begin, entry] : countries) {
    const std::string& name = entries[entry].canonical;
    if (std::find(out.appended_countries.begin(), out.appended_countries.end(), name) ==
        out.appended_countries.end()) {
      out.appended_countries.push_back(name);
      out.tagged += " ";
      out.tagged += tags::kCountryPrefix;
      out.tagged += name;
    }
  }
  return out;
}

TaggedMessage tag_semantic(std::string_view text, const EntityGazetteer& gazetteer) {
  return GazetteerTagger(gazetteer).tag(text);
}

PhraseLexicon::PhraseLexicon(std::vector<std::string> legitimate,
                             std::vector<std::string> smishing)
    : legitimate_(std::move(legitimate)), smishing_(std::move(smishing)) {
  std::set<std::string> legit_lower;
  for (const auto& p : legitimate_) {
    if (trim(p).empty()) throw ConfigError("phrase lexicon: empty legitimate phrase");
    legit_lower.insert(text::ascii_lower(p));
  }
  for (const auto& p : smishing_) {
    if (trim(p).empty()) throw ConfigError("phrase lexicon: empty smishing phrase");
    if (legit_lower.contains(text::ascii_lower(p))) {
      throw ConfigError("phrase lexicon: '" + p + "' is listed as both legitimate and smishing");
    }
  }
}

PhraseLexicon PhraseLexicon::load(const std::filesystem::path& legitimate,
                                  const std::filesystem::path& smishing) {
  return PhraseLexicon(read_lines(legitimate), read_lines(smishing));
}

TaggedMessage tag_phrases(std::string_view input, const PhraseLexicon& lexicon) {
  const Text t(input);
  const std::vector<Region> blocked = protected_regions(t);
  const std::u32string& cps = t.cps();
  const std::u32string lowered = text::ascii_lower(cps);

  auto already_annotated = [&](std::size_t pos) {
    for (auto tag : {tags::kLegitimateLike, tags::kSmishingLike}) {
      const std::u32string marker = text::decode_utf8(std::string(tag) + " ");
      if (pos >= marker.size() && lowered.compare(pos - marker.size(), marker.size(), marker) == 0) {
        return true;
      }
    }
    return false;
  };

  std::vector<Region> candidates;
  auto collect = [&](const std::vector<std::string>& phrases, std::string_view tag) {
    for (const auto& phrase : phrases) {
      const std::u32string needle = text::ascii_lower(text::decode_utf8(phrase));
      for (auto pos = lowered.find(needle); pos != std::u32string::npos;
           pos = lowered.find(needle, pos + 1)) {
        const std::size_t end = pos + needle.size();
        if (!boundary_ok(cps, pos, end) || overlaps_any(blocked, pos, end) ||
            already_annotated(pos)) {
          continue;
        }
        candidates.push_back({pos, end, std::string(tag)});
      }
    }
  };
  collect(lexicon.legitimate(), tags::kLegitimateLike);
  collect(lexicon.smishing(), tags::kSmishingLike);
  std::stable_sort(candidates.begin(), candidates.end(), [](const Region& a, const Region& b) {
    const auto la = a.end - a.begin;
    const auto lb = b.end - b.begin;
    if (la != lb) return la > lb;
    return a.begin < b.begin;
  });
  std::vector<Region> chosen;
  for (const auto& c : candidates) {
    if (!overlaps_any(chosen, c.begin, c.end)) insert_sorted(chosen, c);
  }

  TaggedMessage out;
  out.original = t.bytes();
  out.mode = TagMode::kAnnotate;
  std::size_t cursor = 0;
  for (const auto& r : chosen) {
    out.tagged += t.slice(cursor, r.begin);
    out.tagged += r.tag;
    out.tagged += ' ';
    out.spans.push_back({r.begin, r.end, r.tag, t.slice(r.begin, r.end)});
    cursor = r.begin;
  }
  out.tagged += t.slice(cursor, t.size());
  return out;
}

}  // namespace smishing

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smishing {

// Offsets are codepoint indices into the original text, end exclusive.
struct TagSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string tag;
  std::string surface;

  bool operator==(const TagSpan&) const = default;
};

enum class TagMode {
  kSubstitute,  // the surface is replaced by the tag
  kAnnotate,    // the tag and a space are inserted before the surface
};

struct TaggedMessage {
  std::string original;
  std::string tagged;
  std::vector<TagSpan> spans;
  std::vector<std::string> appended_countries;
  TagMode mode = TagMode::kSubstitute;
};

// Rebuilds the original text from the tagged text and its spans alone.
// Throws Error when the spans are inconsistent with the tagged text.
std::string reconstruct(const TaggedMessage& message);

namespace tags {
inline constexpr std::string_view kUrl = "[URL]";
inline constexpr std::string_view kEmail = "[EMAIL]";
inline constexpr std::string_view kPhone = "[PHONE]";
inline constexpr std::string_view kGpe = "[GPE]";
inline constexpr std::string_view kOrg = "[ORG]";
inline constexpr std::string_view kMoney = "[MONEY]";
inline constexpr std::string_view kLegitimateLike = "[legitimate_like]";
inline constexpr std::string_view kSmishingLike = "[smishing_like]";
inline constexpr std::string_view kCountryPrefix = "country=";
}  // namespace tags

// Pinned patterns. Changing any of them invalidates trained bundles, so the
// version string is recorded in every bundle manifest.
namespace patterns {
inline constexpr std::string_view kVersion = "tagging-regex-v1";
inline constexpr std::string_view kUrl =
    R"((https?://[^\s]+)|(www\.[^\s]+)|([a-z0-9-]+\.(com|net|org|info|biz|co|io|ly|me|ru|cn|uk)(/[^\s]*)?))";
inline constexpr std::string_view kEmail = R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})";
// 7 to 15 digits with optional space/dash/dot separators, an optional
// leading '+' and an optional parenthesised area code.
inline constexpr std::string_view kPhone =
    R"((?<![0-9+])\+?(\([0-9]{1,4}\)[ .-]?)?[0-9]([ .-]?[0-9]){6,14}(?![0-9]))";
inline constexpr std::string_view kMoney =
    R"(((£|\$|€|₹)\s?[0-9][0-9,]*(\.[0-9]{1,2})?)|([0-9][0-9,]*\s?(USD|GBP|EUR|INR|dollars?|pounds?|rupees?)))";

// SHA-256 over the version string and all four patterns.
std::string fingerprint();
}  // namespace patterns

TaggedMessage tag_structural(std::string_view text);

enum class EntityType { kGpe, kOrg };

struct GazetteerEntry {
  EntityType type = EntityType::kGpe;
  std::string surface;
  std::string canonical;
};

class EntityGazetteer {
 public:
  EntityGazetteer() = default;
  explicit EntityGazetteer(std::vector<GazetteerEntry> entries);

  // UTF-8, one "TYPE<TAB>surface<TAB>canonical" entry per line, TYPE in
  // {GPE, ORG}. Canonical country names must be token-safe ([A-Za-z_]+).
  static EntityGazetteer load(const std::filesystem::path& path);
  static EntityGazetteer parse(std::string_view contents);

  std::string serialize() const;

  const std::vector<GazetteerEntry>& entries() const { return entries_; }
  std::span<const std::string> currency_patterns() const { return currency_patterns_; }

 private:
  std::vector<GazetteerEntry> entries_;
  std::vector<std::string> currency_patterns_{std::string(patterns::kMoney)};
};

// Semantic tagging engine. The gazetteer tagger is the default; a statistical
// NER engine can be plugged in behind the same interface.
class EntityTagger {
 public:
  virtual ~EntityTagger() = default;
  virtual TaggedMessage tag(std::string_view text) const = 0;
};

class GazetteerTagger final : public EntityTagger {
 public:
  explicit GazetteerTagger(const EntityGazetteer& gazetteer) : gazetteer_(&gazetteer) {}
  TaggedMessage tag(std::string_view text) const override;

 private:
  const EntityGazetteer* gazetteer_;
};

TaggedMessage tag_semantic(std::string_view text, const EntityGazetteer& gazetteer);

class PhraseLexicon {
 public:
  PhraseLexicon() = default;
  PhraseLexicon(std::vector<std::string> legitimate, std::vector<std::string> smishing);

  // One phrase per line in each file; '#' comments and blank lines skipped.
  static PhraseLexicon load(const std::filesystem::path& legitimate,
                            const std::filesystem::path& smishing);

  const std::vector<std::string>& legitimate() const { return legitimate_; }
  const std::vector<std::string>& smishing() const { return smishing_; }

 private:
  std::vector<std::string> legitimate_;
  std::vector<std::string> smishing_;
};

TaggedMessage tag_phrases(std::string_view text, const PhraseLexicon& lexicon);

}  // namespace smishing

#include "smishing/tagging.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oracles.hpp"
#include "smishing/error.hpp"
#include "smishing/random.hpp"
#include "smishing/text.hpp"

namespace smishing {
namespace {

namespace fs = std::filesystem;

const EntityGazetteer& gazetteer() {
  static const EntityGazetteer g = EntityGazetteer::load(fs::path(SMISHING_DATA_DIR) / "gazetteer.tsv");
  return g;
}

const PhraseLexicon& lexicon() {
  static const PhraseLexicon l = PhraseLexicon::load(
      fs::path(SMISHING_DATA_DIR) / "legitimate_phrases.txt",
      fs::path(SMISHING_DATA_DIR) / "smishing_phrases.txt");
  return l;
}

std::string codepoint_slice(const std::string& s, std::size_t begin, std::size_t end) {
  auto cps = text::decode_utf8(s);
  return text::encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

void expect_consistent(const TaggedMessage& m) {
  std::size_t previous_end = 0;
  for (const auto& span : m.spans) {
    EXPECT_LT(span.start, span.end);
    EXPECT_GE(span.start, previous_end);
    EXPECT_LE(span.end, text::codepoint_length(m.original));
    EXPECT_EQ(codepoint_slice(m.original, span.start, span.end), span.surface);
    previous_end = span.end;
  }
  EXPECT_EQ(reconstruct(m), m.original);
}

TEST(Structural, UrlSpan) {
  auto m = tag_structural("Visit http://bit.ly/a3x now");
  EXPECT_EQ(m.tagged, "Visit [URL] now");
  ASSERT_EQ(m.spans.size(), 1u);
  EXPECT_EQ(m.spans[0], (TagSpan{6, 23, "[URL]", "http://bit.ly/a3x"}));
  expect_consistent(m);
}

TEST(Structural, NoElementsUnchanged) {
  auto m = tag_structural("hello mum see you at 6");
  EXPECT_EQ(m.tagged, "hello mum see you at 6");
  EXPECT_TRUE(m.spans.empty());
}

TEST(Structural, UrlPhoneEmail) {
  // The bare "www." alternative runs to the next whitespace, so the comma
  // belongs to the URL surface.
  auto m = tag_structural("Claim at www.win-prize.co, call 07700900123 or mail a@b.co");
  EXPECT_EQ(m.tagged, "Claim at [URL] call [PHONE] or mail [EMAIL]");
  ASSERT_EQ(m.spans.size(), 3u);
  EXPECT_EQ(m.spans[0].surface, "www.win-prize.co,");
  EXPECT_EQ(m.spans[1].surface, "07700900123");
  EXPECT_EQ(m.spans[2].surface, "a@b.co");
  expect_consistent(m);
}

TEST(Structural, PhoneShapes) {
  EXPECT_EQ(tag_structural("ring +44 7700 900 123 today").tagged, "ring [PHONE] today");
  EXPECT_EQ(tag_structural("call (020) 7946-0958").tagged, "call [PHONE]");
  EXPECT_EQ(tag_structural("pin 123456 only").tagged, "pin 123456 only");
  EXPECT_EQ(tag_structural("id 1234567890123456789").tagged, "id 1234567890123456789");
}

TEST(Structural, UrlInsideLinkKeepsEmail) {
  auto m = tag_structural("go https://x.com/?u=a@b.com ok");
  EXPECT_EQ(m.tagged, "go [URL] ok");
}

TEST(Semantic, OrganisationSubstitution) {
  auto m = tag_semantic("Your HSBC account is locked", gazetteer());
  EXPECT_EQ(m.tagged, "Your [ORG] account is locked");
  EXPECT_EQ(m.spans.size(), 1u);
  EXPECT_TRUE(m.appended_countries.empty());
  expect_consistent(m);
}

TEST(Semantic, MoneyAndCountry) {
  auto m = tag_semantic("Send £500 to our UK office", gazetteer());
  EXPECT_EQ(m.tagged, "Send [MONEY] to our [GPE] office country=UK");
  ASSERT_EQ(m.spans.size(), 2u);
  EXPECT_EQ(m.spans[0], (TagSpan{5, 9, "[MONEY]", "£500"}));
  EXPECT_EQ(m.spans[1], (TagSpan{17, 19, "[GPE]", "UK"}));
  EXPECT_EQ(m.appended_countries, std::vector<std::string>{"UK"});
  expect_consistent(m);
}

TEST(Semantic, EmptyInput) {
  auto m = tag_semantic("", gazetteer());
  EXPECT_EQ(m.tagged, "");
  EXPECT_TRUE(m.spans.empty());
}

TEST(Semantic, CaseRulesAndLongestMatch) {
  // Two-letter codes are case-sensitive; longer names are not.
  EXPECT_EQ(tag_semantic("tell us about it", gazetteer()).tagged, "tell us about it");
  EXPECT_EQ(tag_semantic("flights to INDIA", gazetteer()).tagged,
            "flights to [GPE] country=India");
  // "United States of America" beats "United States" and "America".
  auto m = tag_semantic("from the United States of America and the US", gazetteer());
  EXPECT_EQ(m.tagged, "from the [GPE] and the [GPE] country=US");
  EXPECT_EQ(m.spans[0].surface, "United States of America");
  // No match inside longer words.
  EXPECT_EQ(tag_semantic("USB cable", gazetteer()).tagged, "USB cable");
}

TEST(Semantic, TiesBreakTowardEarlierEntry) {
  EntityGazetteer g(std::vector<GazetteerEntry>{{EntityType::kOrg, "Jordan", "Jordan"},
                                                {EntityType::kGpe, "Jordan", "Jordan"}});
  auto m = tag_semantic("visit Jordan", g);
  EXPECT_EQ(m.tagged, "visit [ORG]");
  EntityGazetteer h(std::vector<GazetteerEntry>{{EntityType::kGpe, "Jordan", "Jordan"},
                                                {EntityType::kOrg, "Jordan", "Jordan"}});
  EXPECT_EQ(tag_semantic("visit Jordan", h).tagged, "visit [GPE] country=Jordan");
}

TEST(Semantic, DistinctCountriesAppendedOnce) {
  auto m = tag_semantic("UK, Britain and Nigeria", gazetteer());
  EXPECT_EQ(m.tagged, "[GPE], [GPE] and [GPE] country=UK country=Nigeria");
  EXPECT_EQ(m.appended_countries, (std::vector<std::string>{"UK", "Nigeria"}));
  expect_consistent(m);
}

TEST(Gazetteer, RejectsBadFiles) {
  EXPECT_THROW(EntityGazetteer::parse("LOC\tParis\tParis\n"), ConfigError);
  EXPECT_THROW(EntityGazetteer::parse("GPE\tSouth Africa\tSouth Africa\n"), ConfigError);
  EXPECT_THROW(EntityGazetteer::parse("GPE\n"), ConfigError);
  auto g = EntityGazetteer::parse("# c\nORG\tHSBC\n");
  EXPECT_EQ(g.entries().at(0).canonical, "HSBC");
  EXPECT_EQ(EntityGazetteer::parse(gazetteer().serialize()).serialize(), gazetteer().serialize());
}

TEST(Phrases, AnnotatesInPlace) {
  auto m = tag_phrases("please verify your account today", lexicon());
  EXPECT_EQ(m.tagged, "please [smishing_like] verify your account today");
  ASSERT_EQ(m.spans.size(), 1u);
  EXPECT_EQ(m.spans[0].surface, "verify your account");
  expect_consistent(m);
  EXPECT_EQ(tag_phrases("thanks, see u", lexicon()).tagged, "thanks, see u");
}

TEST(Phrases, LongestThenLeftmost) {
  PhraseLexicon lex({"see you"}, {"see you at the bank", "bank now"});
  auto m = tag_phrases("See you at the bank now", lex);
  EXPECT_EQ(m.tagged, "[smishing_like] See you at the bank now");
  PhraseLexicon lex2({"a b"}, {"b c"});
  EXPECT_EQ(tag_phrases("a b c", lex2).tagged, "[legitimate_like] a b c");
}

TEST(Phrases, BothKindsKeepOrder) {
  auto m = tag_phrases("Good morning! Your account has been suspended, click here", lexicon());
  EXPECT_EQ(m.tagged,
            "[legitimate_like] Good morning! [smishing_like] Your account has been suspended, "
            "[smishing_like] click here");
  expect_consistent(m);
}

TEST(Phrases, LexiconValidation) {
  EXPECT_THROW(PhraseLexicon({"Click here"}, {"click here"}), ConfigError);
  EXPECT_THROW(PhraseLexicon({""}, {"x"}), ConfigError);
}

using oracle::random_message;

TEST(TaggingProperties, IdempotentReconstructingDeterministic) {
  Rng rng(2024);
  for (int trial = 0; trial < 1500; ++trial) {
    const std::string input = random_message(rng);
    const TaggedMessage results[] = {tag_structural(input), tag_semantic(input, gazetteer()),
                                     tag_phrases(input, lexicon())};
    for (const auto& m : results) {
      SCOPED_TRACE(input);
      expect_consistent(m);
    }
    ASSERT_EQ(tag_structural(results[0].tagged).tagged, results[0].tagged) << input;
    ASSERT_EQ(tag_semantic(results[1].tagged, gazetteer()).tagged, results[1].tagged) << input;
    ASSERT_EQ(tag_phrases(results[2].tagged, lexicon()).tagged, results[2].tagged) << input;
    ASSERT_EQ(tag_semantic(input, gazetteer()).tagged, results[1].tagged);
  }
}

TEST(TaggingProperties, TextOutsideSpansPreservedInOrder) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string input = random_message(rng);
    const auto m = tag_structural(input);
    std::size_t cursor = 0;
    std::size_t search_from = 0;
    for (std::size_t i = 0; i <= m.spans.size(); ++i) {
      const std::size_t gap_end =
          i < m.spans.size() ? m.spans[i].start : text::codepoint_length(input);
      const std::string gap = codepoint_slice(input, cursor, gap_end);
      const auto pos = m.tagged.find(gap, search_from);
      ASSERT_NE(pos, std::string::npos) << input;
      search_from = pos + gap.size();
      if (i < m.spans.size()) cursor = m.spans[i].end;
    }
  }
}

void expect_golden(const TaggedMessage& m, const nlohmann::json& expected) {
  EXPECT_EQ(m.tagged, expected.at("tagged").get<std::string>());
  ASSERT_EQ(m.spans.size(), expected.at("spans").size());
  for (std::size_t i = 0; i < m.spans.size(); ++i) {
    const auto& e = expected["spans"][i];
    EXPECT_EQ(m.spans[i].start, e.at("start").get<std::size_t>());
    EXPECT_EQ(m.spans[i].end, e.at("end").get<std::size_t>());
    EXPECT_EQ(m.spans[i].tag, e.at("tag").get<std::string>());
    EXPECT_EQ(m.spans[i].surface, e.at("surface").get<std::string>());
  }
  expect_consistent(m);
}

TEST(Golden, TwentyMessages) {
  std::ifstream in(fs::path(SMISHING_TEST_DATA_DIR) / "golden_tagging.json");
  ASSERT_TRUE(in);
  const auto cases = nlohmann::json::parse(in);
  ASSERT_EQ(cases.size(), 20u);
  for (const auto& c : cases) {
    const auto input = c.at("text").get<std::string>();
    SCOPED_TRACE(input);
    expect_golden(tag_structural(input), c.at("structural"));
    const auto semantic = tag_semantic(input, gazetteer());
    expect_golden(semantic, c.at("semantic"));
    EXPECT_EQ(semantic.appended_countries, c["semantic"].at("countries").get<std::vector<std::string>>());
    expect_golden(tag_phrases(input, lexicon()), c.at("phrases"));
  }
}

TEST(Patterns, FingerprintIsStable) {
  EXPECT_EQ(patterns::fingerprint(), patterns::fingerprint());
  EXPECT_EQ(patterns::fingerprint().size(), 64u);
}

}  // namespace
}  // namespace smishing

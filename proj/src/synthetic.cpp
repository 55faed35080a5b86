#include "smishing/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "smishing/error.hpp"
#include "smishing/random.hpp"
#include "smishing/text.hpp"

namespace smishing {
namespace {

constexpr std::size_t kMaxLength = 150;

const std::array<std::string_view, 40> kFiller{
    "are we still on for lunch",      "the meeting moved to thursday",   "can you grab some bread",
    "i left the keys on the table",   "the weather is lovely today",     "the kids are at practice",
    "dinner is in the oven",          "the train is a bit slow",         "we should watch that film",
    "my phone battery is low",        "the plumber came by",             "remember to water the plants",
    "the shop closes early",          "traffic is terrible",             "bring a jacket it is cold",
    "the dog needs a walk",           "lets catch up this weekend",      "the report is almost done",
    "did you feed the cat",           "i will be home after work",       "the car is at the garage",
    "the game starts at eight",       "we need more coffee",             "check the group chat",
    "she loved the present",          "the boiler is fixed",             "grandma says hello",
    "the bus was packed",             "tickets are sold out",            "i found your umbrella",
    "practice got cancelled",         "the wifi keeps dropping",         "save me a seat",
    "we are out of milk",             "the party starts at nine",        "pick a film for tonight",
    "the garden looks great",         "my sister is visiting",           "the printer is jammed again",
    "i booked the table"};

const std::array<std::string_view, 10> kPromo{
    "big sale this weekend",     "new menu out now",      "half price pizza tonight",
    "join our loyalty club",     "fresh bakes every day", "spring collection has landed",
    "two for one on cinema",     "free dessert with mains", "members night on friday",
    "our summer range is here"};

// Templates shared by semantic positives and decoys.
const std::array<std::string_view, 6> kEntityTemplates{
    "{org} sent {money} from {country}", "{country} trip cost {money} with {org}",
    "{org} in {country} charged {money}", "got {money} back from {org} in {country}",
    "{money} from {org} for {country}",  "{org} {country} note about {money}"};

const std::array<std::string_view, 5> kUkSurfaces{"UK", "United Kingdom", "Britain", "England", "Great Britain"};
const std::array<std::string_view, 14> kOtherCountries{
    "US",     "Canada",   "Australia", "Germany", "France", "Japan", "Ireland",
    "Mexico", "Brazil",   "Spain",     "Italy",   "USA",    "Kenya", "Singapore"};
const std::array<std::string_view, 5> kSymbols{"£", "$", "€", "₹", ""};
const std::array<std::string_view, 4> kCurrencyWords{"GBP", "USD", "EUR", "pounds"};

const std::array<std::string_view, 6> kContactTemplates{"details at {contact}", "reach us on {contact}",
                                                        "more info {contact}",  "{contact} for info",
                                                        "contact {contact}",    "see {contact}"};
const std::array<std::string_view, 12> kTlds{"com", "net", "org", "info", "biz", "co", "io", "ly", "me", "ru", "cn", "uk"};
const std::array<std::string_view, 16> kUrlWords{"secure", "login", "portal", "help",  "track", "pay",
                                                 "verify", "home",  "update", "alert", "id",    "box",
                                                 "web",    "zone",  "my",     "go"};
const std::array<std::string_view, 10> kNames{"sam", "alex", "jo", "maria", "dev", "li", "omar", "kate", "raj", "ben"};

const std::array<std::string_view, 3> kTrigrams{"£$€", "$€£", "€£$"};
const std::array<std::string_view, 8> kPunctuation{"!!", "...", "?!", ":)", ";)", "!!!", "--", "?"};

std::string replace(std::string s, std::string_view key, std::string_view value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
  return s;
}

class Generator {
 public:
  Generator(const SyntheticConfig& config, const TaggingResources& resources)
      : config_(config), resources_(resources), rng_(config.seed) {
    for (const auto& e : resources.gazetteer.entries()) {
      if (e.type == EntityType::kOrg) orgs_.push_back(e.surface);
    }
    if (orgs_.empty()) throw ConfigError("synthetic generator needs ORG entries in the gazetteer");
    if (resources.phrases.smishing().empty() || resources.phrases.legitimate().empty()) {
      throw ConfigError("synthetic generator needs both phrase lists");
    }
  }

  // Returns the text and whether it is promotional.
  std::pair<std::string, bool> message(std::optional<StreamId> signal) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::vector<std::string> pieces;
      const bool promo = rng_.bernoulli(0.15);
      pieces.emplace_back(promo ? rng_.pick(kPromo) : rng_.pick(kFiller));
      if (rng_.bernoulli(0.5)) pieces.emplace_back(rng_.pick(kFiller));
      if (signal) pieces.push_back(signal_piece(*signal));
      add_decoys(pieces, signal);
      rng_.shuffle(std::span<std::string>(pieces));
      std::string text = normalize_text(join(pieces));
      if (text::codepoint_length(text) > kMaxLength) continue;
      if (!consistent(text, signal)) continue;
      return {text, promo};
    }
    throw Error("synthetic generator could not satisfy its constraints");
  }

 private:
  std::string join(const std::vector<std::string>& pieces) {
    std::string out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (i) out += rng_.bernoulli(0.5) ? ". " : " ";
      out += pieces[i];
    }
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
  }

  std::string money() {
    const auto amount = std::to_string(5 + rng_.below(2000));
    if (rng_.bernoulli(0.7)) {
      std::string_view symbol = rng_.pick(kSymbols);
      if (symbol.empty()) symbol = "£";
      return std::string(symbol) + amount + (rng_.bernoulli(0.2) ? ".00" : "");
    }
    return amount + " " + std::string(rng_.pick(kCurrencyWords));
  }

  std::string entity_sentence(bool org, bool amount, bool uk) {
    std::string s(rng_.pick(kEntityTemplates));
    s = replace(s, "{org}", org ? std::string(rng_.pick(orgs_)) : std::string(rng_.pick(kNames)));
    s = replace(s, "{money}", amount ? money() : std::string("a bit"));
    s = replace(s, "{country}", uk ? rng_.pick(kUkSurfaces) : rng_.pick(kOtherCountries));
    return s;
  }

  std::string url() {
    const std::string tld(rng_.pick(kTlds));
    const std::string a(rng_.pick(kUrlWords)), b(rng_.pick(kUrlWords));
    switch (rng_.below(4)) {
      case 0:
        return "http://" + a + "-" + b + "." + tld + "/" + std::string(rng_.pick(kUrlWords));
      case 1:
        return "www." + a + b + "." + tld;
      case 2:
        return a + "-" + b + "." + tld;
      default:
        return "https://" + a + "." + tld + "/" + b + std::to_string(rng_.below(100));
    }
  }

  std::string digits(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>('0' + rng_.below(10));
    return s;
  }

  std::string phone() {
    switch (rng_.below(4)) {
      case 0:
        return "+44 7" + digits(3) + " " + digits(6);
      case 1:
        return "07" + digits(3) + " " + digits(3) + " " + digits(3);
      case 2:
        return "(0" + digits(2) + ") " + digits(4) + " " + digits(4);
      default:
        return "+1-" + digits(3) + "-" + digits(3) + "-" + digits(4);
    }
  }

  std::string contact_sentence(bool real) {
    std::string contact;
    if (real) {
      contact = rng_.bernoulli(0.5) ? url() : phone();
    } else if (rng_.bernoulli(0.6)) {
      contact = std::string(rng_.pick(kNames)) + "@" + std::string(rng_.pick(kUrlWords)) + "mail." +
                std::string(rng_.pick(kTlds));
    } else {
      contact = (rng_.bernoulli(0.5) ? "room " : "ext ") + digits(1 + rng_.below(4));
    }
    return replace(std::string(rng_.pick(kContactTemplates)), "{contact}", contact);
  }

  // Lexicon words with every adjacency broken.
  std::string scrambled_phrase() {
    const auto& phrase = rng_.pick(resources_.phrases.smishing());
    std::vector<std::string> words;
    for (const auto& w : text::tokenize(phrase)) words.push_back(w);
    rng_.shuffle(std::span<std::string>(words));
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += " " + std::string(rng_.pick(kNames)) + " ";
      out += words[i];
    }
    return out;
  }

  std::string signal_piece(StreamId signal) {
    switch (signal) {
      case StreamId::kSemantic:
        return entity_sentence(rng_.bernoulli(0.7), rng_.bernoulli(0.7), true);
      case StreamId::kStructural:
        return contact_sentence(true);
      case StreamId::kChar:
        return std::string(rng_.pick(kTrigrams));
      case StreamId::kContextual: {
        std::string p = rng_.pick(resources_.phrases.smishing());
        if (rng_.bernoulli(0.3)) p[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p[0])));
        return p;
      }
    }
    return {};
  }

  void add_decoys(std::vector<std::string>& pieces, std::optional<StreamId> signal) {
    auto noisy = [&](StreamId s) { return config_.noise_signal == s && rng_.bernoulli(0.3); };
    if (signal != StreamId::kSemantic && rng_.bernoulli(0.4)) {
      pieces.push_back(entity_sentence(rng_.bernoulli(0.7), rng_.bernoulli(0.7), false));
    }
    if (signal != StreamId::kStructural && rng_.bernoulli(0.3)) pieces.push_back(contact_sentence(false));
    if (rng_.bernoulli(0.4)) pieces.emplace_back(rng_.pick(kPunctuation));
    if (signal != StreamId::kContextual && rng_.bernoulli(0.35)) pieces.push_back(scrambled_phrase());
    if (rng_.bernoulli(0.35)) pieces.push_back(rng_.pick(resources_.phrases.legitimate()));
    for (auto s : kStreamOrder) {
      if (signal != s && noisy(s)) pieces.push_back(signal_piece(s));
    }
  }

  bool consistent(const std::string& text, std::optional<StreamId> signal) {
    for (auto s : kStreamOrder) {
      if (config_.noise_signal == s) continue;
      if (has_signal(s, text, resources_) != (signal == s)) return false;
    }
    return true;
  }

  const SyntheticConfig& config_;
  const TaggingResources& resources_;
  Rng rng_;
  std::vector<std::string> orgs_;
};

}  // namespace

bool has_signal(StreamId signal, std::string_view text, const TaggingResources& resources) {
  switch (signal) {
    case StreamId::kSemantic: {
      const auto t = tag_semantic(text, resources.gazetteer);
      return std::find(t.appended_countries.begin(), t.appended_countries.end(), "UK") !=
             t.appended_countries.end();
    }
    case StreamId::kStructural: {
      const auto t = tag_structural(text);
      return std::any_of(t.spans.begin(), t.spans.end(),
                         [](const TagSpan& s) { return s.tag == tags::kUrl || s.tag == tags::kPhone; });
    }
    case StreamId::kChar:
      return std::any_of(kTrigrams.begin(), kTrigrams.end(),
                         [&](std::string_view t) { return text.find(t) != std::string_view::npos; });
    case StreamId::kContextual: {
      const auto t = tag_phrases(text, resources.phrases);
      return std::any_of(t.spans.begin(), t.spans.end(),
                         [](const TagSpan& s) { return s.tag == tags::kSmishingLike; });
    }
  }
  return false;
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& config, const TaggingResources& resources) {
  if (config.size < 8) throw ConfigError("synthetic corpus needs at least 8 messages");
  if (!(config.positive_rate > 0.0 && config.positive_rate < 1.0)) {
    throw ConfigError("synthetic positive rate must be in (0, 1)");
  }
  std::vector<StreamId> groups;
  for (auto s : kStreamOrder) {
    if (config.noise_signal != s) groups.push_back(s);
  }
  const auto positives = static_cast<std::size_t>(std::llround(config.positive_rate * static_cast<double>(config.size)));
  std::vector<std::optional<StreamId>> plan;
  for (std::size_t i = 0; i < positives; ++i) plan.emplace_back(groups[i % groups.size()]);
  plan.resize(config.size);

  Generator gen(config, resources);
  Rng order(derive_seed(config.seed, 0x6f7264));
  order.shuffle(std::span<std::optional<StreamId>>(plan));

  SyntheticCorpus corpus;
  std::set<std::string> seen;
  for (const auto& signal : plan) {
    std::pair<std::string, bool> m;
    do {
      m = gen.message(signal);
    } while (!seen.insert(message_id(m.first)).second);
    const auto& [text, promo] = m;
    const TernaryLabel label = signal ? TernaryLabel::kSmishing : (promo ? TernaryLabel::kSpam : TernaryLabel::kHam);
    corpus.messages.push_back(make_message(text, label, "synthetic"));
    corpus.signals.push_back(signal);
  }
  return corpus;
}

}  // namespace smishing

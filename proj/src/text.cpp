#include "smishing/text.hpp"

namespace smishing::text {
namespace {

constexpr char32_t kEscapeBase = 0xDC00;

bool is_placeholder_char(char32_t cp) {
  return (cp >= U'A' && cp <= U'Z') || (cp >= U'a' && cp <= U'z') || cp == U'_';
}

}  // namespace

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool valid = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        valid = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (valid) {
      // Reject overlong forms, surrogates and out-of-range values.
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      valid = cp >= kMin[len] && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    }
    if (!valid) {
      out.push_back(kEscapeBase + b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp >= kEscapeBase + 0x80 && cp <= kEscapeBase + 0xFF) {
    out.push_back(static_cast<char>(cp - kEscapeBase));
  } else if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

std::vector<std::size_t> codepoint_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  offsets.reserve(s.size() + 1);
  std::size_t pos = 0;
  for (char32_t cp : decode_utf8(s)) {
    offsets.push_back(pos);
    std::string tmp;
    append_utf8(tmp, cp);
    pos += tmp.size();
  }
  offsets.push_back(pos);
  return offsets;
}

std::size_t codepoint_length(std::string_view s) { return decode_utf8(s).size(); }

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_alnum(char32_t cp) {
  return (cp >= U'0' && cp <= U'9') || (cp >= U'a' && cp <= U'z') ||
         (cp >= U'A' && cp <= U'Z');
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) return is_ascii_alnum(cp);
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0xDC80 && cp <= 0xDCFF) return false;  // undecodable bytes
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, currency, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE00 && cp <= 0xFE0F) return false;  // variation selectors
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

char32_t ascii_lower(char32_t cp) {
  return (cp >= U'A' && cp <= U'Z') ? cp + (U'a' - U'A') : cp;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::u32string ascii_lower(std::u32string_view s) {
  std::u32string out(s);
  for (char32_t& c : out) c = ascii_lower(c);
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  const std::u32string cps = decode_utf8(s);
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return encode_utf8(out);
}

std::vector<std::string> tokenize(std::string_view s) {
  static constexpr std::u32string_view kCountryPrefix = U"country=";
  const std::u32string cps = decode_utf8(s);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = cps.size();
  while (i < n) {
    const char32_t cp = cps[i];
    if (cp == U'[') {
      std::size_t j = i + 1;
      while (j < n && is_placeholder_char(cps[j])) ++j;
      if (j > i + 1 && j < n && cps[j] == U']') {
        tokens.push_back(encode_utf8(std::u32string_view(cps).substr(i, j + 1 - i)));
        i = j + 1;
        continue;
      }
      ++i;
      continue;
    }
    if (!is_word_char(cp)) {
      ++i;
      continue;
    }
    if (std::u32string_view(cps).substr(i).starts_with(kCountryPrefix)) {
      std::size_t j = i + kCountryPrefix.size();
      while (j < n && is_placeholder_char(cps[j])) ++j;
      if (j > i + kCountryPrefix.size()) {
        tokens.push_back(encode_utf8(std::u32string_view(cps).substr(i, j - i)));
        i = j;
        continue;
      }
    }
    std::size_t j = i;
    while (j < n && is_word_char(cps[j])) ++j;
    tokens.push_back(encode_utf8(ascii_lower(std::u32string_view(cps).substr(i, j - i))));
    i = j;
  }
  return tokens;
}

}  // namespace smishing::text

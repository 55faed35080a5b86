#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace smishing::text {

// Decodes UTF-8 into codepoints. Bytes that do not form a valid sequence are
// mapped one-to-one onto U+DC80..U+DCFF so that encode_utf8 restores them.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

// Byte offset of every codepoint start, followed by s.size().
std::vector<std::size_t> codepoint_offsets(std::string_view s);
std::size_t codepoint_length(std::string_view s);

bool is_space(char32_t cp);
bool is_ascii_alnum(char32_t cp);

// Word characters for tokenisation: ASCII letters and digits plus non-ASCII
// codepoints outside the common symbol, punctuation and emoji blocks.
bool is_word_char(char32_t cp);

char32_t ascii_lower(char32_t cp);
std::string ascii_lower(std::string_view s);
std::u32string ascii_lower(std::u32string_view s);

// Trims and collapses each whitespace run to a single ASCII space.
std::string collapse_whitespace(std::string_view s);

// Lowercase word tokens split on non-word boundaries. Bracketed placeholders
// such as "[URL]" or "[smishing_like]" and "country=<Name>" suffix tokens are
// kept verbatim as single tokens.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace smishing::text

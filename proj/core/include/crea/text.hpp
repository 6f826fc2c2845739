#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace crea::text {

// Decodes the codepoint starting at s[i] and advances i. Bytes that are not
// valid UTF-8 are passed through one at a time.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i);
void append_utf8(std::string& out, std::uint32_t cp);

bool is_space(std::uint32_t cp);
bool is_punct(std::uint32_t cp);

// Simple one-to-one case fold covering ASCII, Latin-1, Latin Extended-A/B,
// Greek (final sigma folds to sigma), and Cyrillic.
std::uint32_t fold_case(std::uint32_t cp);
std::string casefold(std::string_view s);

// Unicode-whitespace split; no stemming, no punctuation handling.
std::vector<std::string> tokenize(std::string_view s);
std::string join_tokens(const std::vector<std::string>& tokens);

// Splits on newlines, then on {., !, ?, danda} followed by whitespace.
// The terminator stays with its sentence; empty segments are dropped.
std::vector<std::string> split_sentences(std::string_view s);

using SentenceSplitter =
    std::function<std::vector<std::string>(std::string_view)>;

}  // namespace crea::text

#pragma once

// Small text helpers shared across the toolkit: whitespace tokenization,
// trailing-whitespace trimming, UTF-8 decoding and hashing. Comparison
// semantics everywhere are "trim trailing whitespace/CR, then byte-compare";
// no Unicode normalization or casefolding is ever applied.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kdaudit {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

// Strip trailing ASCII whitespace (covers CR left behind by CRLF files).
std::string_view rtrim(std::string_view s);

// Whitespace-delimited tokens; empty input yields no tokens.
std::vector<std::string_view> split_tokens(std::string_view s);

// Token count without materializing the tokens.
std::size_t count_tokens(std::string_view s);

// Decode UTF-8 into Unicode scalar values. Invalid sequences decode to
// U+FFFD one byte at a time (validation is a separate concern).
std::u32string decode_utf8(std::string_view s);

bool is_valid_utf8(std::string_view s);

// FNV-1a, used for seed derivation and the NatHal hash pre-pass.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace kdaudit

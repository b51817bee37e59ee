#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eog {

// Canonical text normalization used everywhere entities, relations, and
// answers are compared: ASCII-lowercase, trim, collapse whitespace runs
// to single spaces. Bytes >= 0x80 pass through untouched, so UTF-8
// sequences survive intact.
std::string normalize(std::string_view text);

// True if every byte of `text` is whitespace (or the string is empty).
bool is_blank(std::string_view text);

// Number of maximal non-whitespace runs.
std::size_t count_whitespace_tokens(std::string_view text);

// Lowercased whitespace-delimited words of the normalized text.
std::vector<std::string> split_words(std::string_view text);

}  // namespace eog

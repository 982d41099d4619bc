#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace metaqa {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Trims whitespace and removes quote pairs wrapping the whole string
/// (ASCII ' " ` and UTF-8 curly quotes), repeatedly.
std::string strip_quotes(std::string_view s);

/// Lowercased word tokens: runs of ASCII letters, digits, '%' and inner
/// apostrophes (curly apostrophes are normalised to ').
std::vector<std::string> lowercase_words(std::string_view s);

std::size_t edit_distance(std::string_view a, std::string_view b);

/// Levenshtein distance over lowercased text divided by the longer length;
/// 0 for two empty strings.
double normalized_edit_distance(std::string_view a, std::string_view b);

/// Replaces newlines with "\n" and carriage returns with "\r" escapes so the
/// value fits on one line; unescape_line reverses it.
std::string escape_line(std::string_view s);
std::string unescape_line(std::string_view s);

}  // namespace metaqa

#include "metaqa/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>

namespace metaqa {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 4> kOpenQuotes{"\"", "'", "\xE2\x80\x9C", "\xE2\x80\x98"};
constexpr std::array<std::string_view, 4> kCloseQuotes{"\"", "'", "\xE2\x80\x9D",
                                                        "\xE2\x80\x99"};

std::size_t quote_prefix(std::string_view s) {
  for (auto q : kOpenQuotes) {
    if (s.starts_with(q)) return q.size();
  }
  if (s.starts_with("`")) return 1;
  return 0;
}

std::size_t quote_suffix(std::string_view s) {
  for (auto q : kCloseQuotes) {
    if (s.ends_with(q)) return q.size();
  }
  if (s.ends_with("`")) return 1;
  return 0;
}

}  // namespace

std::string trim(std::string_view s) {
  auto begin = std::find_if_not(s.begin(), s.end(), is_space);
  auto end = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return begin < end ? std::string(begin, end) : std::string{};
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string strip_quotes(std::string_view s) {
  auto out = trim(s);
  for (;;) {
    const auto open = quote_prefix(out);
    const auto close = quote_suffix(out);
    if (open == 0 || close == 0 || open + close > out.size()) break;
    out = trim(std::string_view(out).substr(open, out.size() - open - close));
  }
  return out;
}

std::vector<std::string> lowercase_words(std::string_view s) {
  std::string normalized;
  normalized.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.substr(i, 3) == "\xE2\x80\x99") {
      normalized += '\'';
      i += 2;
    } else {
      normalized += s[i];
    }
  }

  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && current.back() == '\'') current.pop_back();
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : normalized) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || ch == '%') {
      current += static_cast<char>(std::tolower(c));
    } else if (ch == '\'' && !current.empty()) {
      current += ch;
    } else {
      flush();
    }
  }
  flush();
  return words;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t substitution = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitution});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(to_lower(a), to_lower(b))) /
         static_cast<double>(longest);
}

std::string escape_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char next = s[i + 1];
      if (next == 'n') { out += '\n'; ++i; continue; }
      if (next == 'r') { out += '\r'; ++i; continue; }
      if (next == '\\') { out += '\\'; ++i; continue; }
    }
    out += s[i];
  }
  return out;
}

}  // namespace metaqa

#include "metaqa/prompts.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "metaqa/error.hpp"
#include "metaqa/text.hpp"
#include "prompts_catalog_data.hpp"

namespace metaqa {

namespace {

constexpr std::array<std::pair<PromptStep, std::string_view>, 8> kStepNames{{
    {PromptStep::ConciseQA, "ConciseQA"},
    {PromptStep::SynonymGen, "SynonymGen"},
    {PromptStep::AntonymGen, "AntonymGen"},
    {PromptStep::VerifySynonym, "VerifySynonym"},
    {PromptStep::VerifyAntonym, "VerifyAntonym"},
    {PromptStep::BaselineSample, "BaselineSample"},
    {PromptStep::BaselineCheck, "BaselineCheck"},
    {PromptStep::AutoValidate, "AutoValidate"},
}};

bool is_name_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Calls on_text for literal runs and on_placeholder for each {name}.
template <typename OnText, typename OnPlaceholder>
void scan_pattern(std::string_view pattern, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t i = 0;
  std::size_t literal_start = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      std::size_t j = i + 1;
      while (j < pattern.size() && is_name_char(pattern[j])) ++j;
      if (j < pattern.size() && pattern[j] == '}' && j > i + 1) {
        on_text(pattern.substr(literal_start, i - literal_start));
        on_placeholder(pattern.substr(i + 1, j - i - 1));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(pattern.substr(literal_start));
}

std::string substitute(std::string_view pattern, const Bindings& bindings, PromptStep step) {
  std::string out;
  out.reserve(pattern.size() + 256);
  scan_pattern(
      pattern, [&](std::string_view text) { out += text; },
      [&](std::string_view name) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::MissingPlaceholder, "{" + std::string(name) + "} unbound for " +
                                                         std::string(to_string(step)));
        }
        if (it->second.empty()) {
          throw Error(ErrorCode::InvalidBinding, "{" + std::string(name) + "} bound to empty text");
        }
        out += it->second;
      });
  return out;
}

void trim_trailing_newlines(std::string& s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
}

}  // namespace

std::string_view to_string(PromptStep step) noexcept {
  for (const auto& [s, name] : kStepNames) {
    if (s == step) return name;
  }
  return "Unknown";
}

std::optional<PromptStep> prompt_step_from_string(std::string_view name) noexcept {
  for (const auto& [s, n] : kStepNames) {
    if (n == name) return s;
  }
  return std::nullopt;
}

std::vector<std::string> placeholders(std::string_view pattern) {
  std::vector<std::string> names;
  scan_pattern(
      pattern, [](std::string_view) {}, [&](std::string_view name) { names.emplace_back(name); });
  return names;
}

const PromptCatalog& PromptCatalog::builtin() {
  static const PromptCatalog catalog = parse(detail::kBuiltinCatalog);
  return catalog;
}

PromptCatalog PromptCatalog::parse(std::string_view text) {
  PromptCatalog catalog;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<PromptStep> step;
  std::string* section = nullptr;

  auto finish = [&] {
    if (step) {
      auto& t = catalog.templates_[*step];
      trim_trailing_newlines(t.system_text);
      trim_trailing_newlines(t.user_pattern);
      if (t.system_text.empty() || t.user_pattern.empty()) {
        throw Error(ErrorCode::CatalogParse,
                    std::string(to_string(*step)) + " needs system and user sections");
      }
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with("=== ") && line.ends_with(" ===") && line.size() > 8) {
      finish();
      const auto name = line.substr(4, line.size() - 8);
      step = prompt_step_from_string(name);
      if (!step) {
        throw Error(ErrorCode::UnknownStep,
                    "line " + std::to_string(line_no) + ": unknown step '" + name + "'");
      }
      if (catalog.templates_.contains(*step)) {
        throw Error(ErrorCode::CatalogParse, "step " + name + " defined twice");
      }
      catalog.templates_[*step].step = *step;
      section = nullptr;
      continue;
    }
    if (line == "--- system ---" || line == "--- user ---") {
      if (!step) {
        throw Error(ErrorCode::CatalogParse,
                    "line " + std::to_string(line_no) + ": section outside a step block");
      }
      auto& t = catalog.templates_[*step];
      section = line == "--- system ---" ? &t.system_text : &t.user_pattern;
      continue;
    }
    if (section == nullptr) {
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      throw Error(ErrorCode::CatalogParse,
                  "line " + std::to_string(line_no) + ": text outside a section");
    }
    if (!section->empty() || !line.empty()) {
      *section += line;
      *section += '\n';
    }
  }
  finish();

  for (const auto& [s, name] : kStepNames) {
    if (!catalog.templates_.contains(s)) {
      throw Error(ErrorCode::CatalogParse, "catalog lacks step " + std::string(name));
    }
  }
  return catalog;
}

PromptCatalog PromptCatalog::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open prompt catalog " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const PromptTemplate& PromptCatalog::at(PromptStep step) const {
  auto it = templates_.find(step);
  if (it == templates_.end()) {
    throw Error(ErrorCode::UnknownStep, std::string(to_string(step)) + " not in catalog");
  }
  return it->second;
}

RenderedPrompt PromptCatalog::render(PromptStep step, const Bindings& bindings) const {
  const auto& t = at(step);
  return {substitute(t.system_text, bindings, step), substitute(t.user_pattern, bindings, step)};
}

std::vector<std::string> parse_numbered_list(std::string_view text) {
  static const std::regex item(R"(^\s*\(?(\d{1,3})[.):]\s+(.*)$)");
  std::vector<std::string> items;
  std::istringstream in{std::string(text)};
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (!std::regex_match(line, m, item)) continue;
    auto body = strip_quotes(m[2].str());
    if (!body.empty()) items.push_back(std::move(body));
  }
  if (items.empty()) throw Error(ErrorCode::NoItemsFound, "no numbered items in reply");
  return items;
}

std::string_view to_string(VerdictValue value) noexcept {
  switch (value) {
    case VerdictValue::Yes: return "Yes";
    case VerdictValue::No: return "No";
    case VerdictValue::NotSure: return "Not Sure";
  }
  return "Not Sure";
}

std::optional<VerdictValue> verdict_from_string(std::string_view name) noexcept {
  if (name == "Yes") return VerdictValue::Yes;
  if (name == "No") return VerdictValue::No;
  if (name == "Not Sure") return VerdictValue::NotSure;
  return std::nullopt;
}

Verdict parse_verdict(std::string_view text) {
  Verdict verdict{VerdictValue::NotSure, std::string(text), false};
  const auto words = lowercase_words(text);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "not" && i + 1 < words.size() && words[i + 1] == "sure") {
      verdict.value = VerdictValue::NotSure;
      verdict.parsed = true;
      return verdict;
    }
    if (words[i] == "yes") {
      verdict.value = VerdictValue::Yes;
      verdict.parsed = true;
      return verdict;
    }
    if (words[i] == "no") {
      verdict.value = VerdictValue::No;
      verdict.parsed = true;
      return verdict;
    }
  }
  return verdict;
}

}  // namespace metaqa

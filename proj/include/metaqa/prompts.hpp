#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metaqa {

enum class PromptStep {
  ConciseQA,
  SynonymGen,
  AntonymGen,
  VerifySynonym,
  VerifyAntonym,
  BaselineSample,
  BaselineCheck,
  AutoValidate,
};

std::string_view to_string(PromptStep step) noexcept;
std::optional<PromptStep> prompt_step_from_string(std::string_view name) noexcept;

struct PromptTemplate {
  PromptStep step = PromptStep::ConciseQA;
  std::string system_text;
  std::string user_pattern;
};

struct RenderedPrompt {
  std::string system;
  std::string user;

  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Names of the `{placeholder}` tokens in a pattern, in order of appearance.
std::vector<std::string> placeholders(std::string_view pattern);

/// The prompt set used by every pipeline step. Immutable once built; safe to
/// share across threads.
class PromptCatalog {
 public:
  /// The catalog compiled into the library (the shipped data/prompts.catalog).
  static const PromptCatalog& builtin();
  static PromptCatalog parse(std::string_view text);
  static PromptCatalog from_file(const std::filesystem::path& path);

  [[nodiscard]] const PromptTemplate& at(PromptStep step) const;

  /// Substitutes every placeholder in both texts. Throws MissingPlaceholder
  /// for an unbound name and InvalidBinding for an empty value.
  [[nodiscard]] RenderedPrompt render(PromptStep step, const Bindings& bindings) const;

 private:
  std::map<PromptStep, PromptTemplate> templates_;
};

/// Items of a `1. text` numbered list, in order, with numbering, whitespace
/// and wrapping quotes stripped. Text before the first item and lines that
/// are not items are ignored. Throws NoItemsFound when nothing parses.
std::vector<std::string> parse_numbered_list(std::string_view text);

enum class VerdictValue { Yes, No, NotSure };

std::string_view to_string(VerdictValue value) noexcept;
std::optional<VerdictValue> verdict_from_string(std::string_view name) noexcept;

struct Verdict {
  VerdictValue value = VerdictValue::NotSure;
  std::string raw_text;
  /// False when no verdict token was found and the value fell back to NotSure.
  bool parsed = true;
};

/// Total: the first standalone "not sure", "yes" or "no" (case-insensitive)
/// decides; "not sure" is recognised before "no". Anything else is NotSure
/// with parsed = false.
Verdict parse_verdict(std::string_view text);

}  // namespace metaqa

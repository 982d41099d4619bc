#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metaqa/mutation.hpp"
#include "metaqa/prompts.hpp"

namespace metaqa {

class Gateway;
class PromptCatalog;

enum class LabelValue { Factual, Hallucination, NeedsReview };
enum class LabelMethod { Auto, Manual };

std::string_view to_string(LabelValue value) noexcept;
std::string_view to_string(LabelMethod method) noexcept;
std::optional<LabelValue> label_value_from_string(std::string_view name) noexcept;

struct Label {
  LabelValue value = LabelValue::NeedsReview;
  LabelMethod method = LabelMethod::Auto;
  std::string rationale;

  friend bool operator==(const Label&, const Label&) = default;
};

/// Ground truth keyed by question id.
using LabelSet = std::map<std::string, Label, std::less<>>;

/// Outcome of comparing a base answer against references in order:
/// the first Yes makes it Factual; otherwise any NotSure needs review;
/// otherwise (all No) it is a Hallucination. Empty input needs review.
LabelValue decide_label(std::span<const VerdictValue> verdicts) noexcept;

struct AutoLabel {
  Label label;
  int calls = 0;
};

/// One AutoValidate call per reference until the first Yes. Gateway errors
/// end the comparison with NeedsReview and a note in the rationale.
/// Reads only the question, the base answer and the references.
AutoLabel auto_validate(std::string_view question, std::string_view base_response,
                        const std::vector<std::string>& references, Gateway& gateway,
                        const PromptCatalog& catalog, const ModelSettings& settings);

/// JSON Lines: {"id", "label", "method", "rationale"} per line, sorted by id.
/// parse_labels skips header objects that carry a "schema" key.
std::string serialize_labels(const LabelSet& labels);
LabelSet parse_labels(std::string_view text);
LabelSet load_labels(const std::filesystem::path& path);

[[nodiscard]] std::size_t count_needs_review(const LabelSet& labels) noexcept;

struct ReviewContext {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<std::string> references;
};

/// Human-editable queue: a header, then one block per NeedsReview label
/// (ordered by id) with fields id, question, answer, references,
/// auto_rationale and an empty resolution.
std::string export_review_queue(const LabelSet& labels, const std::vector<ReviewContext>& contexts);

/// Reads a filled-in queue. Each resolution must be "factual" or
/// "hallucination" (UnresolvedEntry otherwise); ids must be in `known_ids`
/// (UnknownId otherwise).
std::vector<std::pair<std::string, Label>> import_resolutions(
    std::string_view review_text, const std::set<std::string, std::less<>>& known_ids);

/// Overrides labels with manual resolutions.
void apply_resolutions(LabelSet& labels,
                       const std::vector<std::pair<std::string, Label>>& resolutions);

}  // namespace metaqa

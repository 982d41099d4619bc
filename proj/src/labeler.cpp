#include "metaqa/labeler.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

using nlohmann::json;

namespace {

constexpr std::string_view kQueueHeader =
    "# metaqa review queue v1\n"
    "# Set each resolution to factual or hallucination, then run `metaqa review import`.\n";

constexpr std::array<std::string_view, 6> kQueueFields{
    "id", "question", "answer", "references", "auto_rationale", "resolution"};

}  // namespace

std::string_view to_string(LabelValue value) noexcept {
  switch (value) {
    case LabelValue::Factual: return "factual";
    case LabelValue::Hallucination: return "hallucination";
    case LabelValue::NeedsReview: return "needs_review";
  }
  return "needs_review";
}

std::string_view to_string(LabelMethod method) noexcept {
  return method == LabelMethod::Auto ? "auto" : "manual";
}

std::optional<LabelValue> label_value_from_string(std::string_view name) noexcept {
  for (auto v : {LabelValue::Factual, LabelValue::Hallucination, LabelValue::NeedsReview}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

LabelValue decide_label(std::span<const VerdictValue> verdicts) noexcept {
  bool unsure = false;
  for (auto v : verdicts) {
    if (v == VerdictValue::Yes) return LabelValue::Factual;
    if (v == VerdictValue::NotSure) unsure = true;
  }
  if (verdicts.empty() || unsure) return LabelValue::NeedsReview;
  return LabelValue::Hallucination;
}

AutoLabel auto_validate(std::string_view question, std::string_view base_response,
                        const std::vector<std::string>& references, Gateway& gateway,
                        const PromptCatalog& catalog, const ModelSettings& settings) {
  if (references.empty()) {
    throw Error(ErrorCode::InvalidRequest, "auto validation needs at least one reference");
  }
  AutoLabel result;
  std::vector<VerdictValue> verdicts;
  std::string rationale;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto prompt = catalog.render(PromptStep::AutoValidate,
                                       {{"question", std::string(question)},
                                        {"answer", std::string(base_response)},
                                        {"reference", references[i]}});
    const ChatRequest request{settings.model_id,          prompt.system,
                              prompt.user,                settings.temperature,
                              settings.verdict_max_tokens, RequestTag::LabelValidate,
                              0};
    if (!rationale.empty()) rationale += "; ";
    ++result.calls;
    try {
      const auto verdict = parse_verdict(gateway.cached_complete(request).text);
      verdicts.push_back(verdict.value);
      rationale += "ref" + std::to_string(i + 1) + "=" + std::string(to_string(verdict.value));
      if (verdict.value == VerdictValue::Yes) break;
    } catch (const Error& e) {
      rationale += "ref" + std::to_string(i + 1) + "=error(" + std::string(to_string(e.code())) +
                   ")";
      result.label = {LabelValue::NeedsReview, LabelMethod::Auto, rationale + "; degraded"};
      return result;
    }
  }
  result.label = {decide_label(verdicts), LabelMethod::Auto, rationale};
  return result;
}

std::string serialize_labels(const LabelSet& labels) {
  std::string out;
  for (const auto& [id, label] : labels) {
    out += json{{"id", id},
                {"label", to_string(label.value)},
                {"method", to_string(label.method)},
                {"rationale", label.rationale}}
               .dump();
    out += '\n';
  }
  return out;
}

LabelSet parse_labels(std::string_view text) {
  LabelSet labels;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.contains("schema")) continue;  // config header written by the CLI
      const auto id = j.at("id").get<std::string>();
      const auto value = label_value_from_string(j.at("label").get<std::string>());
      if (!value) throw Error(ErrorCode::ParseError, "unknown label");
      const auto method = j.value("method", std::string("auto"));
      if (method != "auto" && method != "manual") {
        throw Error(ErrorCode::ParseError, "unknown method '" + method + "'");
      }
      Label label{*value, method == "manual" ? LabelMethod::Manual : LabelMethod::Auto,
                  j.value("rationale", "")};
      if (label.method == LabelMethod::Manual && label.value == LabelValue::NeedsReview) {
        throw Error(ErrorCode::ParseError, "manual labels cannot need review");
      }
      if (!labels.emplace(id, std::move(label)).second) {
        throw Error(ErrorCode::DuplicateId, "label for '" + id + "' repeated");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DuplicateId) throw;
      throw Error(ErrorCode::ParseError, "labels line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, "labels line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

LabelSet load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open labels " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_labels(buffer.str());
}

std::size_t count_needs_review(const LabelSet& labels) noexcept {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](const auto& kv) {
    return kv.second.value == LabelValue::NeedsReview;
  }));
}

std::string export_review_queue(const LabelSet& labels,
                                const std::vector<ReviewContext>& contexts) {
  std::map<std::string, const ReviewContext*, std::less<>> by_id;
  for (const auto& c : contexts) by_id[c.id] = &c;

  std::string out(kQueueHeader);
  for (const auto& [id, label] : labels) {
    if (label.value != LabelValue::NeedsReview) continue;
    const auto it = by_id.find(id);
    const ReviewContext empty{id, "", "", {}};
    const auto& c = it == by_id.end() ? empty : *it->second;
    std::string refs;
    for (const auto& r : c.references) {
      if (!refs.empty()) refs += " ; ";
      refs += r;
    }
    out += "\n";
    out += "id: " + escape_line(id) + "\n";
    out += "question: " + escape_line(c.question) + "\n";
    out += "answer: " + escape_line(c.answer) + "\n";
    out += "references: " + escape_line(refs) + "\n";
    out += "auto_rationale: " + escape_line(label.rationale) + "\n";
    out += "resolution:\n";
  }
  return out;
}

std::vector<std::pair<std::string, Label>> import_resolutions(
    std::string_view review_text, const std::set<std::string, std::less<>>& known_ids) {
  struct Block {
    std::map<std::string, std::string, std::less<>> fields;
  };
  std::vector<Block> blocks;
  std::istringstream in{std::string(review_text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.starts_with("#")) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::ParseError, "review line " + std::to_string(line_no) + ": no field");
    }
    const auto name = trim(std::string_view(line).substr(0, colon));
    if (std::find(kQueueFields.begin(), kQueueFields.end(), name) == kQueueFields.end()) {
      throw Error(ErrorCode::ParseError,
                  "review line " + std::to_string(line_no) + ": unknown field '" + name + "'");
    }
    if (name == "id") blocks.emplace_back();
    if (blocks.empty()) {
      throw Error(ErrorCode::ParseError,
                  "review line " + std::to_string(line_no) + ": field before any id");
    }
    blocks.back().fields[name] = unescape_line(trim(std::string_view(line).substr(colon + 1)));
  }

  std::vector<std::pair<std::string, Label>> out;
  for (const auto& block : blocks) {
    const auto& id = block.fields.at("id");
    if (!known_ids.contains(id)) throw Error(ErrorCode::UnknownId, "'" + id + "' is not in the run");
    const auto it = block.fields.find("resolution");
    const auto resolution = it == block.fields.end() ? std::string{} : to_lower(it->second);
    if (resolution != "factual" && resolution != "hallucination") {
      throw Error(ErrorCode::UnresolvedEntry,
                  "'" + id + "' has resolution '" + resolution +
                      "'; expected factual or hallucination");
    }
    const auto rationale = block.fields.contains("auto_rationale")
                               ? "manual review; auto: " + block.fields.at("auto_rationale")
                               : std::string("manual review");
    out.emplace_back(id, Label{resolution == "factual" ? LabelValue::Factual
                                                       : LabelValue::Hallucination,
                               LabelMethod::Manual, rationale});
  }
  return out;
}

void apply_resolutions(LabelSet& labels,
                       const std::vector<std::pair<std::string, Label>>& resolutions) {
  for (const auto& [id, label] : resolutions) labels[id] = label;
}

}  // namespace metaqa

#include "metaqa/usage.hpp"

#include <array>
#include <utility>

#include <nlohmann/json.hpp>

#include "metaqa/error.hpp"

namespace metaqa {

namespace {

constexpr std::array<std::pair<RequestTag, std::string_view>, 8> kTagNames{{
    {RequestTag::ConciseQa, "qa.concise"},
    {RequestTag::MutationSynonym, "mutation.synonym"},
    {RequestTag::MutationAntonym, "mutation.antonym"},
    {RequestTag::VerifySynonym, "verify.synonym"},
    {RequestTag::VerifyAntonym, "verify.antonym"},
    {RequestTag::BaselineSample, "baseline.sample"},
    {RequestTag::BaselineCheck, "baseline.check"},
    {RequestTag::LabelValidate, "label.validate"},
}};

bool is_metaqa_tag(RequestTag tag) {
  switch (tag) {
    case RequestTag::ConciseQa:
    case RequestTag::MutationSynonym:
    case RequestTag::MutationAntonym:
    case RequestTag::VerifySynonym:
    case RequestTag::VerifyAntonym:
      return true;
    default:
      return false;
  }
}

bool is_baseline_tag(RequestTag tag) {
  return tag == RequestTag::ConciseQa || tag == RequestTag::BaselineSample ||
         tag == RequestTag::BaselineCheck;
}

}  // namespace

std::string_view to_string(RequestTag tag) noexcept {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "unknown";
}

std::optional<RequestTag> request_tag_from_string(std::string_view name) noexcept {
  for (const auto& [t, n] : kTagNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const TokenUsage& usage) {
  j = nlohmann::json{{"prompt_tokens", usage.prompt_tokens},
                     {"completion_tokens", usage.completion_tokens},
                     {"total_tokens", usage.total_tokens}};
}

void from_json(const nlohmann::json& j, TokenUsage& usage) {
  usage.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  usage.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  usage.total_tokens = j.value("total_tokens", usage.prompt_tokens + usage.completion_tokens);
}

double growth_rate_percent(double avg_cost, double avg_base) {
  if (avg_base <= 0.0) {
    throw Error(ErrorCode::InvalidRequest, "growth rate needs a positive base cost");
  }
  return avg_cost / avg_base * 100.0;
}

CostColumns UsageReport::columns() const {
  CostColumns c;
  for (const auto& [tag, usage] : per_tag) {
    const auto tokens = static_cast<double>(usage.total_tokens);
    if (tag == RequestTag::ConciseQa) c.base += tokens;
    if (is_metaqa_tag(tag)) c.metaqa += tokens;
    if (is_baseline_tag(tag)) c.baseline += tokens;
  }
  return c;
}

CostColumns UsageReport::average_per_question(std::int64_t questions) const {
  if (questions <= 0) return {};
  auto c = columns();
  const auto n = static_cast<double>(questions);
  return {c.base / n, c.metaqa / n, c.baseline / n};
}

nlohmann::json UsageReport::to_json(std::int64_t questions) const {
  nlohmann::json tags = nlohmann::json::object();
  for (const auto& [tag, usage] : per_tag) {
    auto calls_it = calls.find(tag);
    tags[std::string(metaqa::to_string(tag))] = {
        {"usage", usage}, {"calls", calls_it == calls.end() ? 0 : calls_it->second}};
  }
  nlohmann::json out{{"per_tag", tags}, {"total", total}, {"questions", questions}};
  if (questions > 0) {
    const auto avg = average_per_question(questions);
    nlohmann::json a{{"base", avg.base}, {"metaqa", avg.metaqa}, {"baseline", avg.baseline}};
    out["avg_per_question"] = a;
    if (avg.base > 0.0) {
      // ratio convention: cost / base * 100
      // a column equal to base means that method did not run
      nlohmann::json growth = nlohmann::json::object();
      growth["metaqa"] = avg.metaqa > avg.base
                             ? nlohmann::json(growth_rate_percent(avg.metaqa, avg.base))
                             : nlohmann::json(nullptr);
      growth["baseline"] = avg.baseline > avg.base
                               ? nlohmann::json(growth_rate_percent(avg.baseline, avg.base))
                               : nlohmann::json(nullptr);
      out["growth_rate_percent"] = growth;
    }
  }
  return out;
}

void UsageAccumulator::record(RequestTag tag, const TokenUsage& usage) {
  std::lock_guard lock(mutex_);
  state_.per_tag[tag] += usage;
  state_.calls[tag] += 1;
  state_.total += usage;
}

UsageReport UsageAccumulator::report() const {
  std::lock_guard lock(mutex_);
  return state_;
}

void UsageAccumulator::reset() {
  std::lock_guard lock(mutex_);
  state_ = {};
}

}  // namespace metaqa

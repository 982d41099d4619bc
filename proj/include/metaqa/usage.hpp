#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace metaqa {

/// Pipeline step that issued an LLM call. Usage is accounted per tag.
enum class RequestTag {
  ConciseQa,
  MutationSynonym,
  MutationAntonym,
  VerifySynonym,
  VerifyAntonym,
  BaselineSample,
  BaselineCheck,
  LabelValidate,
};

std::string_view to_string(RequestTag tag) noexcept;
std::optional<RequestTag> request_tag_from_string(std::string_view name) noexcept;

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;

  static TokenUsage of(std::int64_t prompt, std::int64_t completion) {
    return {prompt, completion, prompt + completion};
  }

  [[nodiscard]] bool consistent() const noexcept {
    return prompt_tokens >= 0 && completion_tokens >= 0 &&
           total_tokens == prompt_tokens + completion_tokens;
  }

  TokenUsage& operator+=(const TokenUsage& other) noexcept {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    total_tokens += other.total_tokens;
    return *this;
  }

  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) noexcept { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

void to_json(nlohmann::json& j, const TokenUsage& usage);
void from_json(const nlohmann::json& j, TokenUsage& usage);

/// Token cost grouped into the three columns of a cost comparison:
/// answering alone, the full metamorphic pipeline, and the sampling baseline.
/// Both pipeline columns include the base answer.
struct CostColumns {
  double base = 0.0;
  double metaqa = 0.0;
  double baseline = 0.0;
};

/// Growth rate as cost / base * 100. This is a ratio expressed in percent,
/// not an increase; it matches how published token-cost tables report it.
double growth_rate_percent(double avg_cost, double avg_base);

struct UsageReport {
  std::map<RequestTag, TokenUsage> per_tag;
  std::map<RequestTag, std::int64_t> calls;
  TokenUsage total;

  [[nodiscard]] CostColumns columns() const;
  [[nodiscard]] CostColumns average_per_question(std::int64_t questions) const;
  [[nodiscard]] nlohmann::json to_json(std::int64_t questions) const;
};

/// Thread-safe per-tag usage counter for one run.
class UsageAccumulator {
 public:
  void record(RequestTag tag, const TokenUsage& usage);
  [[nodiscard]] UsageReport report() const;
  void reset();

 private:
  mutable std::mutex mutex_;
  UsageReport state_;
};

}  // namespace metaqa

#include "metaqa/baseline.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/parallel.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

using nlohmann::json;

SampleSet sample_responses(std::string_view question, int k, Gateway& gateway,
                           const PromptCatalog& catalog, const ModelSettings& settings,
                           double sample_temperature, int workers) {
  if (k < 1) throw Error(ErrorCode::InvalidRequest, "sample count must be at least 1");
  const auto prompt =
      catalog.render(PromptStep::BaselineSample, {{"question", std::string(question)}});

  std::vector<std::optional<ChatResponse>> replies(static_cast<std::size_t>(k));
  parallel_for(replies.size(), workers, [&](std::size_t i) {
    const ChatRequest request{settings.model_id,
                              prompt.system,
                              prompt.user,
                              sample_temperature,
                              settings.answer_max_tokens,
                              RequestTag::BaselineSample,
                              static_cast<std::uint32_t>(i + 1)};
    try {
      replies[i] = gateway.cached_complete(request);
    } catch (const Error& e) {
      spdlog::warn("baseline sample {} failed: {}", i + 1, e.what());
    }
  });

  SampleSet set;
  for (const auto& reply : replies) {
    if (!reply) {
      set.degraded = true;
      continue;
    }
    set.usage += reply->usage;
    set.samples.push_back(trim(reply->text));
  }
  return set;
}

Score consistency_score_of(const std::vector<Verdict>& support_verdicts) {
  if (support_verdicts.empty()) throw Error(ErrorCode::EmptySamples, "no samples to score");
  std::int64_t halves = 0;
  for (const auto& v : support_verdicts) {
    if (v.value == VerdictValue::No) halves += 2;
    if (v.value == VerdictValue::NotSure) halves += 1;
  }
  return {halves, 2 * static_cast<std::int64_t>(support_verdicts.size())};
}

SupportCheck consistency_score(std::string_view base, const std::vector<std::string>& samples,
                               Gateway& gateway, const PromptCatalog& catalog,
                               const ModelSettings& settings, int workers) {
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "no samples to check");
  std::vector<Verdict> verdicts(samples.size());
  std::vector<TokenUsage> usage(samples.size());
  std::vector<char> failed(samples.size(), 0);
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    try {
      const auto prompt = catalog.render(
          PromptStep::BaselineCheck, {{"reference", samples[i]}, {"answer", std::string(base)}});
      const ChatRequest request{settings.model_id,          prompt.system,
                                prompt.user,                settings.temperature,
                                settings.verdict_max_tokens, RequestTag::BaselineCheck,
                                0};
      const auto response = gateway.cached_complete(request);
      verdicts[i] = parse_verdict(response.text);
      usage[i] = response.usage;
    } catch (const Error& e) {
      spdlog::warn("support check {} failed: {}", i, e.what());
      verdicts[i] = Verdict{VerdictValue::NotSure, "", false};
      failed[i] = 1;
    }
  });

  SupportCheck check{verdicts, consistency_score_of(verdicts), false, {}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check.usage += usage[i];
    check.degraded = check.degraded || failed[i] != 0;
  }
  return check;
}

ConsistencyTrace run_baseline(std::string question_id, std::string_view question,
                              std::string_view base, Gateway& gateway,
                              const PromptCatalog& catalog, const BaselineOptions& options) {
  ConsistencyTrace trace;
  trace.question_id = std::move(question_id);
  trace.base_response = std::string(base);
  trace.threshold = options.threshold;

  auto set = sample_responses(question, options.samples, gateway, catalog, options.model,
                              options.sample_temperature, options.workers);
  trace.samples = std::move(set.samples);
  trace.degraded = set.degraded;
  trace.usage += set.usage;
  if (trace.samples.empty()) return trace;

  auto check = consistency_score(base, trace.samples, gateway, catalog, options.model,
                                 options.workers);
  trace.support_verdicts = std::move(check.verdicts);
  trace.score = check.score;
  trace.classified_hallucination = classify(check.score, trace.threshold);
  trace.degraded = trace.degraded || check.degraded;
  trace.usage += check.usage;
  return trace;
}

void to_json(json& j, const ConsistencyTrace& trace) {
  json verdicts = json::array();
  for (const auto& v : trace.support_verdicts) {
    verdicts.push_back({{"verdict", to_string(v.value)},
                        {"verdict_raw", v.raw_text},
                        {"verdict_parsed", v.parsed}});
  }
  j = json{{"method", "baseline"},
           {"question_id", trace.question_id},
           {"base_response", trace.base_response},
           {"samples", trace.samples},
           {"support_verdicts", verdicts},
           {"score", trace.score ? json(trace.score->to_string()) : json(nullptr)},
           {"score_exact", trace.score ? json(*trace.score) : json(nullptr)},
           {"threshold", trace.threshold.to_string()},
           {"classified_hallucination", trace.classified_hallucination},
           {"degraded", trace.degraded},
           {"usage", trace.usage}};
}

void from_json(const json& j, ConsistencyTrace& trace) {
  trace = {};
  trace.question_id = j.at("question_id").get<std::string>();
  trace.base_response = j.value("base_response", "");
  trace.samples = j.value("samples", std::vector<std::string>{});
  for (const auto& v : j.at("support_verdicts")) {
    const auto value = verdict_from_string(v.at("verdict").get<std::string>());
    if (!value) throw Error(ErrorCode::ParseError, "unknown verdict in baseline trace");
    trace.support_verdicts.push_back(
        {*value, v.value("verdict_raw", ""), v.value("verdict_parsed", true)});
  }
  trace.threshold = Threshold::parse(j.at("threshold").get<std::string>());
  trace.degraded = j.value("degraded", false);
  if (j.contains("usage")) trace.usage = j.at("usage").get<TokenUsage>();
  if (!trace.support_verdicts.empty()) {
    trace.score = consistency_score_of(trace.support_verdicts);
    trace.classified_hallucination = classify(*trace.score, trace.threshold);
  }
}

}  // namespace metaqa

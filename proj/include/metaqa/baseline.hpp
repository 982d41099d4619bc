#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaqa/mutation.hpp"
#include "metaqa/prompts.hpp"
#include "metaqa/scorer.hpp"

namespace metaqa {

class Gateway;
class PromptCatalog;

/// Prompt-based sampling-consistency baseline: resample answers, ask whether
/// each sample supports the base response, score the unsupported share.
struct ConsistencyTrace {
  std::string question_id;
  std::string base_response;
  std::vector<std::string> samples;
  std::vector<Verdict> support_verdicts;
  std::optional<Score> score;
  Threshold threshold;
  bool classified_hallucination = false;
  bool degraded = false;
  TokenUsage usage;
};

void to_json(nlohmann::json& j, const ConsistencyTrace& trace);
void from_json(const nlohmann::json& j, ConsistencyTrace& trace);

struct BaselineOptions {
  ModelSettings model;  ///< check calls use model.temperature
  double sample_temperature = 0.5;
  int samples = 10;
  Threshold threshold;
  int workers = 4;
};

struct SampleSet {
  std::vector<std::string> samples;
  bool degraded = false;
  TokenUsage usage;
};

/// k independent answers at `sample_temperature`. Each call carries its own
/// nonce (1..k) so cached samples stay distinct. Failed calls are dropped.
SampleSet sample_responses(std::string_view question, int k, Gateway& gateway,
                           const PromptCatalog& catalog, const ModelSettings& settings,
                           double sample_temperature, int workers = 4);

/// Share of samples that do not support the base: (No + 0.5 NotSure) / K.
Score consistency_score_of(const std::vector<Verdict>& support_verdicts);

struct SupportCheck {
  std::vector<Verdict> verdicts;
  Score score;
  bool degraded = false;
  TokenUsage usage;
};

/// One support check per sample. Throws EmptySamples for an empty list.
SupportCheck consistency_score(std::string_view base, const std::vector<std::string>& samples,
                               Gateway& gateway, const PromptCatalog& catalog,
                               const ModelSettings& settings, int workers = 4);

ConsistencyTrace run_baseline(std::string question_id, std::string_view question,
                              std::string_view base, Gateway& gateway,
                              const PromptCatalog& catalog, const BaselineOptions& options);

}  // namespace metaqa

#include "metaqa/pipeline.hpp"

#include <array>

#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/parallel.hpp"
#include "metaqa/prompts.hpp"
#include "metaqa/text.hpp"
#include "metaqa/verifier.hpp"

namespace metaqa {

namespace {

ChatResponse ask_concise(std::string_view question, Gateway& gateway,
                         const PromptCatalog& catalog, const ModelSettings& settings) {
  const auto prompt = catalog.render(PromptStep::ConciseQA, {{"question", std::string(question)}});
  const ChatRequest request{settings.model_id,     prompt.system,
                            prompt.user,           settings.temperature,
                            settings.answer_max_tokens, RequestTag::ConciseQa,
                            0};
  return gateway.cached_complete(request);
}

}  // namespace

std::string concise_answer(std::string_view question, Gateway& gateway,
                           const PromptCatalog& catalog, const ModelSettings& settings) {
  return trim(ask_concise(question, gateway, catalog, settings).text);
}

DetectionTrace detect(std::string question_id, std::string_view question,
                      std::optional<std::string> answer, Gateway& gateway,
                      const PromptCatalog& catalog, const DetectorOptions& options) {
  DetectionTrace trace;
  trace.question_id = std::move(question_id);
  trace.question = std::string(question);
  trace.threshold = options.threshold;

  if (answer) {
    trace.base_response = trim(*answer);
  } else {
    const auto response = ask_concise(question, gateway, catalog, options.answer_model);
    trace.base_response = trim(response.text);
    trace.usage += response.usage;
  }
  if (trace.base_response.empty()) {
    throw Error(ErrorCode::MalformedResponse, "empty base response for " + trace.question_id);
  }

  // the two relation batches are independent calls
  std::array<MutationBatch, 2> batches{MutationBatch{Relation::Synonymy, {}, false, {}},
                                       MutationBatch{Relation::Antonymy, {}, false, {}}};
  const std::array<int, 2> counts{options.syn_count, options.ant_count};
  std::array<bool, 2> failed{false, false};
  parallel_for(2, options.workers, [&](std::size_t r) {
    if (counts[r] <= 0) return;
    try {
      batches[r] = generate_mutations(question, trace.base_response, batches[r].relation,
                                      counts[r], gateway, catalog, options.answer_model);
    } catch (const Error& e) {
      spdlog::warn("{} generation failed for {}: {}", to_string(batches[r].relation),
                   trace.question_id, e.what());
      failed[r] = true;
    }
  });

  std::vector<Mutation> all;
  for (const auto& b : batches) {
    all.insert(all.end(), b.mutations.begin(), b.mutations.end());
    trace.shortfall = trace.shortfall || b.shortfall;
    trace.usage += b.usage;
  }
  trace.degraded = failed[0] || failed[1];
  trace.verified = verify_all(all, gateway, catalog, options.verifier_model, options.workers);
  for (const auto& v : trace.verified) trace.usage += v.usage;
  score_trace(trace);
  return trace;
}

}  // namespace metaqa

#include "metaqa/verifier.hpp"

#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/parallel.hpp"

namespace metaqa {

RenderedPrompt verification_prompt(const Mutation& mutation, const PromptCatalog& catalog) {
  const auto step = mutation.relation == Relation::Synonymy ? PromptStep::VerifySynonym
                                                            : PromptStep::VerifyAntonym;
  return catalog.render(step, {{"mutation", mutation.text}});
}

VerifiedMutation verify(const Mutation& mutation, Gateway& gateway, const PromptCatalog& catalog,
                        const ModelSettings& settings) {
  const auto prompt = verification_prompt(mutation, catalog);
  const ChatRequest request{settings.model_id,
                            prompt.system,
                            prompt.user,
                            settings.temperature,
                            settings.verdict_max_tokens,
                            mutation.relation == Relation::Synonymy ? RequestTag::VerifySynonym
                                                                    : RequestTag::VerifyAntonym,
                            0};
  const auto response = gateway.cached_complete(request);
  return {mutation, parse_verdict(response.text), response.usage, false};
}

std::vector<VerifiedMutation> verify_all(const std::vector<Mutation>& batch, Gateway& gateway,
                                         const PromptCatalog& catalog,
                                         const ModelSettings& settings, int workers) {
  std::vector<VerifiedMutation> out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    try {
      out[i] = verify(batch[i], gateway, catalog, settings);
    } catch (const Error& e) {
      spdlog::warn("verification of mutation {} failed: {}", i, e.what());
      out[i] = {batch[i], Verdict{VerdictValue::NotSure, "", false}, {}, true};
    }
  });
  return out;
}

}  // namespace metaqa

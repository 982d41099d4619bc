#pragma once

#include <vector>

#include "metaqa/mutation.hpp"
#include "metaqa/prompts.hpp"
#include "metaqa/usage.hpp"

namespace metaqa {

class Gateway;
class PromptCatalog;

struct VerifiedMutation {
  Mutation mutation;
  Verdict verdict;
  TokenUsage usage;
  bool degraded = false;  ///< gateway failed; verdict recorded as NotSure
};

/// The verification prompt for one mutation. Depends on nothing but the
/// mutation text and its relation.
RenderedPrompt verification_prompt(const Mutation& mutation, const PromptCatalog& catalog);

/// One independent LLM call judging the mutation's factuality.
/// Gateway errors propagate.
VerifiedMutation verify(const Mutation& mutation, Gateway& gateway, const PromptCatalog& catalog,
                        const ModelSettings& settings);

/// Order-preserving map of verify(); calls may run concurrently on up to
/// `workers` threads. A failed call yields NotSure with degraded set.
std::vector<VerifiedMutation> verify_all(const std::vector<Mutation>& batch, Gateway& gateway,
                                         const PromptCatalog& catalog,
                                         const ModelSettings& settings, int workers = 4);

}  // namespace metaqa

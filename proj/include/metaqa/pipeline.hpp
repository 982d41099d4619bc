#pragma once

#include <optional>
#include <string>

#include "metaqa/mutation.hpp"
#include "metaqa/scorer.hpp"

namespace metaqa {

class Gateway;
class PromptCatalog;

struct DetectorOptions {
  ModelSettings answer_model;
  ModelSettings verifier_model;  ///< same model as answer_model unless ablating
  int syn_count = 5;
  int ant_count = 5;
  Threshold threshold;
  int workers = 4;
};

/// Step 1: one concise, single-sentence answer to the question.
std::string concise_answer(std::string_view question, Gateway& gateway,
                           const PromptCatalog& catalog, const ModelSettings& settings);

/// Runs generate, verify, score and classify for one question. When `answer`
/// is given the concise-answer step is skipped. Gateway failures during
/// generation or verification degrade the trace instead of throwing; a
/// failure to obtain the base answer throws.
DetectionTrace detect(std::string question_id, std::string_view question,
                      std::optional<std::string> answer, Gateway& gateway,
                      const PromptCatalog& catalog, const DetectorOptions& options);

}  // namespace metaqa

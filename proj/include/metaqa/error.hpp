#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metaqa {

enum class ErrorCode {
  // llm_gateway
  InvalidRequest,
  BackendUnreachable,
  AuthFailure,
  MalformedResponse,
  ScriptExhausted,
  CacheCorrupt,
  // prompt_kit
  MissingPlaceholder,
  UnknownStep,
  InvalidBinding,
  CatalogParse,
  NoItemsFound,
  // scorer
  EmptyVerdicts,
  InvalidThreshold,
  // dataset_store
  ParseError,
  DuplicateId,
  SampleTooLarge,
  // labeler
  UnresolvedEntry,
  UnknownId,
  // baseline
  EmptySamples,
  // eval_harness
  MissingLabel,
  UnresolvedLabel,
  MismatchedRuns,
  InsufficientMutations,
  InvalidGrid,
  // cli
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace metaqa

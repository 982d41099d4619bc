#include "metaqa/error.hpp"

namespace metaqa {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::UnknownStep: return "UnknownStep";
    case ErrorCode::InvalidBinding: return "InvalidBinding";
    case ErrorCode::CatalogParse: return "CatalogParse";
    case ErrorCode::NoItemsFound: return "NoItemsFound";
    case ErrorCode::EmptyVerdicts: return "EmptyVerdicts";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::UnresolvedEntry: return "UnresolvedEntry";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::UnresolvedLabel: return "UnresolvedLabel";
    case ErrorCode::MismatchedRuns: return "MismatchedRuns";
    case ErrorCode::InsufficientMutations: return "InsufficientMutations";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace metaqa

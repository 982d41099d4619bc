#include "metaqa/gateway.hpp"

#include <cmath>

#include "metaqa/error.hpp"
#include "metaqa/response_cache.hpp"

namespace metaqa {

void ChatRequest::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > kMaxTemperature) {
    throw Error(ErrorCode::InvalidRequest,
                "temperature " + std::to_string(temperature) + " outside [0, 2]");
  }
  if (max_tokens <= 0) {
    throw Error(ErrorCode::InvalidRequest, "max_tokens must be positive");
  }
  if (model_id.empty()) throw Error(ErrorCode::InvalidRequest, "model_id is empty");
  if (system_prompt.empty() || user_prompt.empty()) {
    throw Error(ErrorCode::InvalidRequest, "prompts must be non-empty");
  }
}

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Live: return "live";
    case BackendKind::Mock: return "mock";
    case BackendKind::Cache: return "cache";
  }
  return "unknown";
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {
  if (!backend_) throw Error(ErrorCode::InvalidRequest, "gateway needs a backend");
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  auto response = backend_->complete(request);
  if (!response.usage.consistent()) {
    throw Error(ErrorCode::MalformedResponse, "backend reported inconsistent token usage");
  }
  usage_.record(request.tag, response.usage);
  return response;
}

ChatResponse Gateway::cached_complete(const ChatRequest& request) {
  request.validate();
  if (!cache_) return complete(request);
  return cache_->get_or_compute(request, [this](const ChatRequest& r) { return complete(r); });
}

}  // namespace metaqa

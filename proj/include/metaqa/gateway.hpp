#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "metaqa/usage.hpp"

namespace metaqa {

inline constexpr double kMaxTemperature = 2.0;
inline constexpr int kDefaultAnswerTokens = 512;
inline constexpr int kDefaultVerdictTokens = 16;

struct ChatRequest {
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.1;
  int max_tokens = kDefaultAnswerTokens;
  RequestTag tag = RequestTag::ConciseQa;
  /// Distinguishes deliberately repeated requests (resampling, regeneration).
  /// Zero means "no nonce" and is left out of the cache key.
  std::uint32_t nonce = 0;

  /// Throws Error{InvalidRequest} on any precondition violation.
  void validate() const;
};

enum class BackendKind { Live, Mock, Cache };

std::string_view to_string(BackendKind kind) noexcept;

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  BackendKind backend = BackendKind::Mock;
  std::int64_t latency_ms = 0;
};

/// A chat-completion provider. Implementations must be safe for concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

class ResponseCache;

/// Front door for every LLM call in the pipeline: validates requests,
/// consults the optional on-disk cache and charges usage per request tag.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ChatBackend> backend,
                   std::shared_ptr<ResponseCache> cache = nullptr);

  /// Uncached call. Charges the response's usage to the accumulator.
  ChatResponse complete(const ChatRequest& request);

  /// Cache-first call. Hits come back with backend=Cache and charge nothing.
  /// Without a configured cache this is equivalent to complete().
  ChatResponse cached_complete(const ChatRequest& request);

  [[nodiscard]] UsageReport usage_report() const { return usage_.report(); }
  UsageAccumulator& usage() noexcept { return usage_; }
  [[nodiscard]] ResponseCache* cache() const noexcept { return cache_.get(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  UsageAccumulator usage_;
};

}  // namespace metaqa

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>

#include "metaqa/gateway.hpp"

namespace metaqa {

struct LiveConfig {
  /// Full URL of a chat-completions endpoint, e.g.
  /// https://api.openai.com/v1/chat/completions or a local server speaking the same protocol.
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "METAQA_API_KEY";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  int max_inflight = 4;
  std::chrono::seconds timeout{60};
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Parsed endpoint: "scheme://host:port" for the connection plus the request path.
struct Endpoint {
  std::string origin;
  std::string path;
};

Endpoint parse_endpoint(const std::string& url);

/// Backoff before retry number `retry` (1-based): initial * 2^(retry-1), scaled
/// by a jitter factor in [0.8, 1.2].
std::chrono::milliseconds backoff_delay(std::chrono::milliseconds initial, int retry,
                                        double jitter_factor);

/// Bearer-token HTTP client for the /v1/chat/completions wire protocol.
/// Retries 429 and 5xx with exponential backoff (429 honors Retry-After);
/// 401/403 fail immediately. At most `max_inflight` requests are on the wire.
class LiveBackend final : public ChatBackend {
 public:
  explicit LiveBackend(LiveConfig config);
  ~LiveBackend() override;

  ChatResponse complete(const ChatRequest& request) override;

  /// Request body for the wire protocol.
  static std::string encode_request(const ChatRequest& request);
  /// Parses a 200 response body; throws MalformedResponse.
  static ChatResponse decode_response(const std::string& body);

 private:
  LiveConfig config_;
  Endpoint endpoint_;
  std::string api_key_;
  std::counting_semaphore<256> inflight_;
};

}  // namespace metaqa

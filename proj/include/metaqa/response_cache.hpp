#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "metaqa/gateway.hpp"

namespace metaqa {

/// Canonical serialization of the fields that identify a request:
/// compact JSON with sorted keys over model_id, system_prompt, user_prompt,
/// temperature (fixed 4 decimals, as a string), max_tokens, and nonce when set.
std::string canonical_request(const ChatRequest& request);

/// Lowercase hex SHA-256 of canonical_request().
std::string cache_key(const ChatRequest& request);

std::string sha256_hex(std::string_view data);

struct CacheStats {
  std::int64_t entries = 0;
  std::int64_t bytes = 0;
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  std::int64_t evictions = 0;
};

/// Content-addressed on-disk response store: one file per key, named by the
/// hex key, holding the canonical request and the response as JSON.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Stored response for the key, with backend=Cache. Corrupt entries are
  /// evicted, logged, and reported as a miss.
  std::optional<ChatResponse> lookup(const ChatRequest& request);

  /// Write-then-rename so readers never observe a partial entry.
  void store(const ChatRequest& request, const ChatResponse& response);

  /// Serialized per key: concurrent callers for one key compute once.
  ChatResponse get_or_compute(const ChatRequest& request,
                              const std::function<ChatResponse(const ChatRequest&)>& compute);

  [[nodiscard]] CacheStats stats() const;
  /// Removes every entry file; returns how many were removed.
  std::int64_t clear();

 private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path dir_;
  std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
  std::atomic<std::int64_t> hits_{0};
  std::atomic<std::int64_t> misses_{0};
  std::atomic<std::int64_t> evictions_{0};
};

}  // namespace metaqa

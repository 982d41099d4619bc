#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaqa/gateway.hpp"

namespace metaqa {

/// One scripted reply. Every matcher that is set must hold; an entry with no
/// matchers matches anything.
struct MockEntry {
  std::optional<std::string> prompt;    ///< exact user prompt text
  std::optional<RequestTag> tag;        ///< request tag
  std::optional<std::string> contains;  ///< substring of the user prompt
  std::optional<std::uint32_t> nonce;
  std::string response;
  /// Simulated failure instead of a reply: "unreachable", "auth", "malformed".
  std::optional<std::string> error;
  std::optional<TokenUsage> usage;

  [[nodiscard]] bool matches(const ChatRequest& request) const;
};

void from_json(const nlohmann::json& j, MockEntry& entry);
void to_json(nlohmann::json& j, const MockEntry& entry);

/// Deterministic scripted backend. Matching is stateless: the first entry
/// that matches wins, so results do not depend on call order or concurrency.
class MockBackend final : public ChatBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::vector<MockEntry> entries) : entries_(std::move(entries)) {}

  /// JSON Lines, one MockEntry per line; blank lines and '#' comments skipped.
  static MockBackend from_file(const std::filesystem::path& path);
  static std::vector<MockEntry> parse_script(std::string_view text);

  void add(MockEntry entry) { entries_.push_back(std::move(entry)); }
  [[nodiscard]] const std::vector<MockEntry>& entries() const noexcept { return entries_; }

  ChatResponse complete(const ChatRequest& request) override;

  [[nodiscard]] std::int64_t call_count() const noexcept { return calls_.load(); }
  [[nodiscard]] std::vector<ChatRequest> captured() const;

  /// Deterministic token estimate used when an entry carries no usage:
  /// one token per four bytes, rounded up, at least one.
  static std::int64_t estimate_tokens(std::string_view text) noexcept;

 private:
  std::vector<MockEntry> entries_;
  std::atomic<std::int64_t> calls_{0};
  mutable std::mutex capture_mutex_;
  std::vector<ChatRequest> captured_;
};

}  // namespace metaqa

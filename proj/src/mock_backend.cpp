#include "metaqa/mock_backend.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaqa/error.hpp"

namespace metaqa {

using nlohmann::json;

bool MockEntry::matches(const ChatRequest& request) const {
  if (prompt && *prompt != request.user_prompt) return false;
  if (tag && *tag != request.tag) return false;
  if (contains && request.user_prompt.find(*contains) == std::string::npos) return false;
  if (nonce && *nonce != request.nonce) return false;
  return true;
}

void from_json(const json& j, MockEntry& entry) {
  entry = {};
  if (j.contains("prompt")) entry.prompt = j.at("prompt").get<std::string>();
  if (j.contains("tag")) {
    const auto name = j.at("tag").get<std::string>();
    entry.tag = request_tag_from_string(name);
    if (!entry.tag) throw Error(ErrorCode::ParseError, "unknown request tag '" + name + "'");
  }
  if (j.contains("contains")) entry.contains = j.at("contains").get<std::string>();
  if (j.contains("nonce")) entry.nonce = j.at("nonce").get<std::uint32_t>();
  if (j.contains("error")) {
    entry.error = j.at("error").get<std::string>();
  } else {
    entry.response = j.at("response").get<std::string>();
  }
  if (j.contains("usage")) {
    const auto& u = j.at("usage");
    entry.usage = TokenUsage::of(u.at("prompt_tokens").get<std::int64_t>(),
                                 u.at("completion_tokens").get<std::int64_t>());
  }
}

void to_json(json& j, const MockEntry& entry) {
  j = json::object();
  if (entry.prompt) j["prompt"] = *entry.prompt;
  if (entry.tag) j["tag"] = to_string(*entry.tag);
  if (entry.contains) j["contains"] = *entry.contains;
  if (entry.nonce) j["nonce"] = *entry.nonce;
  if (entry.error) {
    j["error"] = *entry.error;
  } else {
    j["response"] = entry.response;
  }
  if (entry.usage) j["usage"] = *entry.usage;
}

std::vector<MockEntry> MockBackend::parse_script(std::string_view text) {
  std::vector<MockEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      entries.push_back(json::parse(line).get<MockEntry>());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError,
                  "mock script line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  "mock script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return entries;
}

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open mock script " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return MockBackend(parse_script(buffer.str()));
}

std::int64_t MockBackend::estimate_tokens(std::string_view text) noexcept {
  const auto n = static_cast<std::int64_t>(text.size());
  return n == 0 ? 1 : (n + 3) / 4;
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  calls_.fetch_add(1);
  {
    std::lock_guard lock(capture_mutex_);
    captured_.push_back(request);
  }
  for (const auto& entry : entries_) {
    if (!entry.matches(request)) continue;
    if (entry.error) {
      if (*entry.error == "auth") throw Error(ErrorCode::AuthFailure, "scripted auth failure");
      if (*entry.error == "malformed") {
        throw Error(ErrorCode::MalformedResponse, "scripted malformed response");
      }
      throw Error(ErrorCode::BackendUnreachable, "scripted failure: " + *entry.error);
    }
    ChatResponse response;
    response.text = entry.response;
    response.backend = BackendKind::Mock;
    response.usage = entry.usage.value_or(TokenUsage::of(
        estimate_tokens(request.system_prompt) + estimate_tokens(request.user_prompt),
        estimate_tokens(entry.response)));
    return response;
  }
  throw Error(ErrorCode::ScriptExhausted,
              "no scripted reply for [" + std::string(to_string(request.tag)) + "] " +
                  request.user_prompt.substr(0, 120));
}

std::vector<ChatRequest> MockBackend::captured() const {
  std::lock_guard lock(capture_mutex_);
  return captured_;
}

}  // namespace metaqa

#include "metaqa/response_cache.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"

namespace metaqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "metaqa-cache/1";

json canonical_object(const ChatRequest& request) {
  json j{{"model_id", request.model_id},
         {"system_prompt", request.system_prompt},
         {"user_prompt", request.user_prompt},
         {"temperature", fmt::format("{:.4f}", request.temperature)},
         {"max_tokens", request.max_tokens}};
  if (request.nonce != 0) j["nonce"] = request.nonce;
  return j;
}

bool is_key_name(const std::string& name) {
  if (name.size() != 64) return false;
  for (char c : name) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::string temp_suffix() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format(".tmp.{:016x}", rng());
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 digest failed");
  }
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string canonical_request(const ChatRequest& request) {
  return canonical_object(request).dump();
}

std::string cache_key(const ChatRequest& request) { return sha256_hex(canonical_request(request)); }

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw Error(ErrorCode::Io, "cannot create cache directory " + dir_.string());
  }
}

std::optional<ChatResponse> ResponseCache::lookup(const ChatRequest& request) {
  const auto key = cache_key(request);
  const auto path = dir_ / key;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    misses_.fetch_add(1);
    return std::nullopt;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  in.close();

  try {
    const auto entry = json::parse(buffer.str());
    if (entry.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::CacheCorrupt, "unknown format tag");
    }
    if (entry.at("request").dump() != canonical_request(request) ||
        sha256_hex(entry.at("request").dump()) != key) {
      throw Error(ErrorCode::CacheCorrupt, "stored request does not match key");
    }
    const auto& r = entry.at("response");
    ChatResponse response;
    response.text = r.at("text").get<std::string>();
    if (sha256_hex(response.text) != entry.at("text_sha256").get<std::string>()) {
      throw Error(ErrorCode::CacheCorrupt, "response text checksum mismatch");
    }
    response.usage = r.at("usage").get<TokenUsage>();
    if (!response.usage.consistent()) {
      throw Error(ErrorCode::CacheCorrupt, "inconsistent stored usage");
    }
    response.latency_ms = r.value("latency_ms", std::int64_t{0});
    response.backend = BackendKind::Cache;
    hits_.fetch_add(1);
    return response;
  } catch (const std::exception& e) {
    spdlog::warn("cache entry {} is corrupt ({}); evicting", key, e.what());
    std::error_code ec;
    fs::remove(path, ec);
    evictions_.fetch_add(1);
    misses_.fetch_add(1);
    return std::nullopt;
  }
}

void ResponseCache::store(const ChatRequest& request, const ChatResponse& response) {
  const auto key = cache_key(request);
  json entry{{"format", kFormat},
             {"key", key},
             {"request", canonical_object(request)},
             {"request_tag", to_string(request.tag)},
             {"response",
              {{"text", response.text},
               {"usage", response.usage},
               {"latency_ms", response.latency_ms},
               {"backend", to_string(response.backend)}}},
             {"text_sha256", sha256_hex(response.text)}};

  const auto final_path = dir_ / key;
  const auto temp_path = dir_ / (key + temp_suffix());
  {
    std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write cache entry " + temp_path.string());
    out << entry.dump(2) << '\n';
    if (!out.flush()) throw Error(ErrorCode::Io, "short write on " + temp_path.string());
  }
  std::error_code ec;
  fs::rename(temp_path, final_path, ec);
  if (ec) {
    fs::remove(temp_path, ec);
    throw Error(ErrorCode::Io, "cannot publish cache entry " + final_path.string());
  }
}

std::mutex& ResponseCache::key_mutex(const std::string& key) {
  std::lock_guard lock(map_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

ChatResponse ResponseCache::get_or_compute(
    const ChatRequest& request, const std::function<ChatResponse(const ChatRequest&)>& compute) {
  std::lock_guard lock(key_mutex(cache_key(request)));
  if (auto hit = lookup(request)) return *hit;
  auto response = compute(request);
  store(request, response);
  return response;
}

CacheStats ResponseCache::stats() const {
  CacheStats s;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || !is_key_name(entry.path().filename().string())) continue;
    ++s.entries;
    s.bytes += static_cast<std::int64_t>(entry.file_size());
  }
  s.hits = hits_.load();
  s.misses = misses_.load();
  s.evictions = evictions_.load();
  return s;
}

std::int64_t ResponseCache::clear() {
  std::int64_t removed = 0;
  std::vector<fs::path> doomed;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() &&
        (is_key_name(name) || (name.size() > 64 && is_key_name(name.substr(0, 64)) &&
                               name.compare(64, 5, ".tmp.") == 0))) {
      doomed.push_back(entry.path());
    }
  }
  for (const auto& path : doomed) {
    std::error_code ec;
    if (fs::remove(path, ec)) ++removed;
  }
  return removed;
}

}  // namespace metaqa

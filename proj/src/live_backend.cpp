#include "metaqa/live_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"

namespace metaqa {

using nlohmann::json;

namespace {

double jitter() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(0.8, 1.2);
  return dist(rng);
}

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;
  std::counting_semaphore<256>& sem;
};

}  // namespace

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint URL lacks a scheme: " + url);
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::InvalidConfig, "unsupported scheme '" + scheme + "'");
  }
  const auto host_start = scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (e.origin.size() <= host_start) {
    throw Error(ErrorCode::InvalidConfig, "endpoint URL lacks a host: " + url);
  }
  return e;
}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds initial, int retry,
                                        double jitter_factor) {
  const double base = static_cast<double>(initial.count()) * std::ldexp(1.0, std::max(0, retry - 1));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(base * jitter_factor)));
}

LiveBackend::LiveBackend(LiveConfig config)
    : config_(std::move(config)),
      endpoint_(parse_endpoint(config_.endpoint_url)),
      inflight_(std::clamp(config_.max_inflight, 1, 256)) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr) {
    throw Error(ErrorCode::AuthFailure,
                "environment variable " + config_.api_key_env + " is not set");
  }
  api_key_ = key;
  if (config_.max_attempts < 1) config_.max_attempts = 1;
  if (!config_.sleep) {
    config_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

LiveBackend::~LiveBackend() = default;

std::string LiveBackend::encode_request(const ChatRequest& request) {
  json body{{"model", request.model_id},
            {"messages",
             json::array({{{"role", "system"}, {"content", request.system_prompt}},
                          {{"role", "user"}, {"content", request.user_prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  return body.dump();
}

ChatResponse LiveBackend::decode_response(const std::string& body) {
  ChatResponse response;
  response.backend = BackendKind::Live;
  try {
    const auto j = json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    response.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      const auto prompt = u.value("prompt_tokens", std::int64_t{0});
      const auto completion = u.value("completion_tokens", std::int64_t{0});
      if (prompt < 0 || completion < 0) {
        throw Error(ErrorCode::MalformedResponse, "negative token counts");
      }
      response.usage = TokenUsage::of(prompt, completion);
      if (u.contains("total_tokens") &&
          u["total_tokens"].get<std::int64_t>() != response.usage.total_tokens) {
        spdlog::warn("reported total_tokens {} differs from prompt+completion {}",
                     u["total_tokens"].get<std::int64_t>(), response.usage.total_tokens);
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::MalformedResponse, e.what());
  }
  return response;
}

ChatResponse LiveBackend::complete(const ChatRequest& request) {
  request.validate();
  const auto body = encode_request(request);
  const auto started = std::chrono::steady_clock::now();

  std::string last_failure;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    std::chrono::milliseconds wait{0};
    {
      SemaphoreGuard slot(inflight_);
      httplib::Client client(endpoint_.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      client.set_bearer_token_auth(api_key_);

      auto result = client.Post(endpoint_.path, body, "application/json");
      if (!result) {
        last_failure = "network error: " + httplib::to_string(result.error());
      } else {
        const int status = result->status;
        if (status == 200) {
          auto response = decode_response(result->body);
          response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - started)
                                    .count();
          return response;
        }
        if (status == 401 || status == 403) {
          throw Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(status));
        }
        if (status != 429 && status < 500) {
          throw Error(ErrorCode::InvalidRequest,
                      "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));
        }
        last_failure = "HTTP " + std::to_string(status);
        if (status == 429 && result->has_header("Retry-After")) {
          try {
            wait = std::chrono::seconds(std::stoll(result->get_header_value("Retry-After")));
          } catch (const std::exception&) {
            wait = std::chrono::milliseconds{0};
          }
        }
      }
    }
    if (attempt == config_.max_attempts) break;
    if (wait.count() == 0) wait = backoff_delay(config_.initial_backoff, attempt, jitter());
    spdlog::warn("{} on attempt {}/{}; retrying in {} ms", last_failure, attempt,
                 config_.max_attempts, wait.count());
    config_.sleep(wait);
  }
  throw Error(ErrorCode::BackendUnreachable,
              last_failure + " after " + std::to_string(config_.max_attempts) + " attempts");
}

}  // namespace metaqa

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/live_backend.hpp"
#include "metaqa/mock_backend.hpp"
#include "metaqa/parallel.hpp"
#include "metaqa/response_cache.hpp"

using namespace metaqa;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ChatRequest sample_request(std::string user = "Is θ \"quoted\"?\nyes") {
  ChatRequest r;
  r.model_id = "gpt-3.5-turbo-0125";
  r.system_prompt = "sys";
  r.user_prompt = std::move(user);
  r.temperature = 0.1;
  r.max_tokens = 512;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("metaqa-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static std::atomic<int>& counter() {
    static std::atomic<int> c{0};
    return c;
  }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(CacheKey, GoldenValues) {
  // Reference digests computed with Python:
  //   hashlib.sha256(json.dumps(d, sort_keys=True, separators=(',', ':'),
  //                             ensure_ascii=False).encode()).hexdigest()
  auto r = sample_request();
  EXPECT_EQ(canonical_request(r),
            R"({"max_tokens":512,"model_id":"gpt-3.5-turbo-0125","system_prompt":"sys",)"
            R"("temperature":"0.1000","user_prompt":"Is θ \"quoted\"?\nyes"})");
  EXPECT_EQ(cache_key(r), "4995d2b5e450a06280c9e139088e1665731ad1c1975f38b6ba0dad8049318558");
  r.nonce = 3;
  EXPECT_EQ(cache_key(r), "32e8198b03dd05c7d687745842f25013e1e691a24018d531b24b910754d48697");
}

TEST(CacheKey, SensitiveToEveryField) {
  const auto base = cache_key(sample_request());
  auto r = sample_request();
  r.model_id = "other";
  EXPECT_NE(cache_key(r), base);
  r = sample_request();
  r.temperature = 0.10004;  // rounds to the same 4 decimals
  EXPECT_EQ(cache_key(r), base);
  r.temperature = 0.2;
  EXPECT_NE(cache_key(r), base);
  r = sample_request();
  r.max_tokens = 16;
  EXPECT_NE(cache_key(r), base);
  r = sample_request();
  r.tag = RequestTag::VerifyAntonym;  // tag is accounting only
  EXPECT_EQ(cache_key(r), base);
}

TEST(ResponseCache, StoreLookupAndUsageOnHit) {
  TempDir dir;
  ResponseCache cache(dir.path);
  const auto r = sample_request();
  EXPECT_FALSE(cache.lookup(r));
  cache.store(r, {"answer", TokenUsage::of(10, 5), BackendKind::Live, 42});
  const auto hit = cache.lookup(r);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->text, "answer");
  EXPECT_EQ(hit->backend, BackendKind::Cache);
  EXPECT_EQ(hit->usage, TokenUsage::of(10, 5));
  EXPECT_TRUE(fs::exists(dir.path / cache_key(r)));
  const auto s = cache.stats();
  EXPECT_EQ(s.entries, 1);
  EXPECT_EQ(s.hits, 1);
  EXPECT_EQ(s.misses, 1);
  EXPECT_EQ(cache.clear(), 1);
  EXPECT_EQ(cache.stats().entries, 0);
}

TEST(ResponseCache, CorruptEntryIsEvicted) {
  TempDir dir;
  ResponseCache cache(dir.path);
  const auto r = sample_request();
  cache.store(r, {"answer", TokenUsage::of(1, 1), BackendKind::Mock, 0});
  const auto file = dir.path / cache_key(r);
  {
    std::ofstream out(file, std::ios::trunc);
    out << "{ not json";
  }
  EXPECT_FALSE(cache.lookup(r));
  EXPECT_FALSE(fs::exists(file));
  EXPECT_EQ(cache.stats().evictions, 1);

  // an entry whose text does not match its digest is also corrupt
  cache.store(r, {"answer", TokenUsage::of(1, 1), BackendKind::Mock, 0});
  auto j = json::parse(std::ifstream(file));
  j["response"]["text"] = "tampered";
  std::ofstream(file, std::ios::trunc) << j.dump();
  EXPECT_FALSE(cache.lookup(r));
}

TEST(ResponseCache, ConcurrentCallersComputeOnce) {
  TempDir dir;
  ResponseCache cache(dir.path);
  std::atomic<int> computed{0};
  const auto r = sample_request();
  parallel_for(16, 8, [&](std::size_t) {
    const auto resp = cache.get_or_compute(r, [&](const ChatRequest&) {
      ++computed;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      return ChatResponse{"x", TokenUsage::of(1, 1), BackendKind::Mock, 0};
    });
    EXPECT_EQ(resp.text, "x");
  });
  EXPECT_EQ(computed.load(), 1);
}

TEST(Gateway, CachedCallsChargeOnlyMisses) {
  TempDir dir;
  auto mock = std::make_shared<MockBackend>();
  mock->add({std::nullopt, std::nullopt, std::nullopt, std::nullopt, "reply", std::nullopt,
             TokenUsage::of(7, 3)});
  Gateway gw(mock, std::make_shared<ResponseCache>(dir.path));
  auto r = sample_request();
  r.tag = RequestTag::VerifySynonym;
  EXPECT_EQ(gw.cached_complete(r).backend, BackendKind::Mock);
  const auto second = gw.cached_complete(r);
  EXPECT_EQ(second.backend, BackendKind::Cache);
  EXPECT_EQ(second.usage, TokenUsage::of(7, 3));
  EXPECT_EQ(mock->call_count(), 1);
  const auto report = gw.usage_report();
  EXPECT_EQ(report.total.total_tokens, 10);
  EXPECT_EQ(report.calls.at(RequestTag::VerifySynonym), 1);

  Gateway warm(mock, std::make_shared<ResponseCache>(dir.path));
  (void)warm.cached_complete(r);
  EXPECT_EQ(mock->call_count(), 1);
  EXPECT_EQ(warm.usage_report().total.total_tokens, 0);
}

TEST(Gateway, RejectsInvalidRequestsBeforeCalling) {
  auto mock = std::make_shared<MockBackend>();
  Gateway gw(mock);
  auto r = sample_request();
  r.temperature = 2.5;
  EXPECT_EQ(code_of([&] { (void)gw.complete(r); }), ErrorCode::InvalidRequest);
  r = sample_request();
  r.max_tokens = 0;
  EXPECT_EQ(code_of([&] { (void)gw.complete(r); }), ErrorCode::InvalidRequest);
  r = sample_request("");
  EXPECT_EQ(code_of([&] { (void)gw.complete(r); }), ErrorCode::InvalidRequest);
  EXPECT_EQ(mock->call_count(), 0);
}

TEST(MockBackend, ScriptMatchingAndErrors) {
  const auto entries = MockBackend::parse_script(R"(
# comment
{"tag": "verify.synonym", "contains": "cats", "response": "Yes", "usage": {"prompt_tokens": 4, "completion_tokens": 1, "total_tokens": 5}}
{"tag": "verify.synonym", "response": "No"}
{"contains": "down", "error": "unreachable"}
{"contains": "key", "error": "auth"}
{"contains": "garbled", "error": "malformed"}
)");
  auto mock = std::make_shared<MockBackend>(entries);
  auto r = sample_request("Do cats purr?");
  r.tag = RequestTag::VerifySynonym;
  const auto yes = mock->complete(r);
  EXPECT_EQ(yes.text, "Yes");
  EXPECT_EQ(yes.usage.total_tokens, 5);
  r.user_prompt = "Do dogs purr?";
  const auto no = mock->complete(r);
  EXPECT_EQ(no.text, "No");
  EXPECT_EQ(no.usage.completion_tokens, MockBackend::estimate_tokens("No"));
  EXPECT_EQ(mock->call_count(), 2);

  r.tag = RequestTag::ConciseQa;
  r.user_prompt = "server down";
  EXPECT_EQ(code_of([&] { (void)mock->complete(r); }), ErrorCode::BackendUnreachable);
  r.user_prompt = "bad key";
  EXPECT_EQ(code_of([&] { (void)mock->complete(r); }), ErrorCode::AuthFailure);
  r.user_prompt = "garbled";
  EXPECT_EQ(code_of([&] { (void)mock->complete(r); }), ErrorCode::MalformedResponse);
  r.user_prompt = "nothing matches";
  EXPECT_EQ(code_of([&] { (void)mock->complete(r); }), ErrorCode::ScriptExhausted);
  EXPECT_EQ(mock->captured().size(), 6U);
  EXPECT_EQ(MockBackend::estimate_tokens(""), 1);
  EXPECT_EQ(MockBackend::estimate_tokens("12345"), 2);
}

TEST(MockBackend, BadScriptLine) {
  EXPECT_THROW((void)MockBackend::parse_script("{\"response\": 1}"), Error);
  EXPECT_THROW((void)MockBackend::parse_script("not json"), Error);
}

// ---- live backend against a local server ----------------------------------

namespace {

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler)
      : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   ++hits_;
                   handler_(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  std::function<void(const httplib::Request&, httplib::Response&)> handler_;
  std::atomic<int> hits_{0};
  int port_ = 0;
  std::thread thread_;
};

std::string ok_body(const std::string& text, int prompt, int completion, int total) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
              {"usage",
               {{"prompt_tokens", prompt},
                {"completion_tokens", completion},
                {"total_tokens", total}}}}
      .dump();
}

struct SleepLog {
  std::mutex m;
  std::vector<std::chrono::milliseconds> waits;
  std::function<void(std::chrono::milliseconds)> fn() {
    return [this](std::chrono::milliseconds d) {
      std::lock_guard lock(m);
      waits.push_back(d);
    };
  }
};

LiveConfig live_config(const LocalServer& server, SleepLog& log) {
  ::setenv("METAQA_TEST_KEY", "secret", 1);
  LiveConfig c;
  c.endpoint_url = server.url();
  c.api_key_env = "METAQA_TEST_KEY";
  c.sleep = log.fn();
  c.timeout = std::chrono::seconds(5);
  return c;
}

}  // namespace

TEST(LiveBackend, WireFormatAndUsageSum) {
  std::string seen_auth, seen_body;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(ok_body("Paris.", 12, 3, 99), "application/json");
  });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  const auto resp = backend.complete(sample_request());
  EXPECT_EQ(resp.text, "Paris.");
  EXPECT_EQ(resp.backend, BackendKind::Live);
  EXPECT_EQ(resp.usage, TokenUsage::of(12, 3));  // reported total ignored
  EXPECT_EQ(seen_auth, "Bearer secret");
  const auto body = json::parse(seen_body);
  EXPECT_EQ(body["model"], "gpt-3.5-turbo-0125");
  EXPECT_EQ(body["messages"][1]["content"], sample_request().user_prompt);
  EXPECT_EQ(body["max_tokens"], 512);
}

TEST(LiveBackend, RetriesServerErrorsWithBackoff) {
  std::atomic<int> n{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (n++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(ok_body("ok", 1, 1, 2), "application/json");
  });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  EXPECT_EQ(backend.complete(sample_request()).text, "ok");
  ASSERT_EQ(log.waits.size(), 1U);
  EXPECT_GE(log.waits[0].count(), 800);
  EXPECT_LE(log.waits[0].count(), 1200);
}

TEST(LiveBackend, HonoursRetryAfter) {
  std::atomic<int> n{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (n++ == 0) {
      res.status = 429;
      res.set_header("Retry-After", "2");
      return;
    }
    res.set_content(ok_body("ok", 1, 1, 2), "application/json");
  });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  (void)backend.complete(sample_request());
  ASSERT_EQ(log.waits.size(), 1U);
  EXPECT_EQ(log.waits[0], std::chrono::milliseconds(2000));
}

TEST(LiveBackend, GivesUpAfterThreeAttempts) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  EXPECT_EQ(code_of([&] { (void)backend.complete(sample_request()); }),
            ErrorCode::BackendUnreachable);
  EXPECT_EQ(server.hits(), 3);
  ASSERT_EQ(log.waits.size(), 2U);
  EXPECT_GE(log.waits[1].count(), 1600);
  EXPECT_LE(log.waits[1].count(), 2400);
}

TEST(LiveBackend, AuthAndClientErrorsAreNotRetried) {
  int status = 401;
  LocalServer server([&](const httplib::Request&, httplib::Response& res) { res.status = status; });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  EXPECT_EQ(code_of([&] { (void)backend.complete(sample_request()); }), ErrorCode::AuthFailure);
  status = 400;
  EXPECT_EQ(code_of([&] { (void)backend.complete(sample_request()); }),
            ErrorCode::InvalidRequest);
  EXPECT_EQ(server.hits(), 2);
  EXPECT_TRUE(log.waits.empty());
}

TEST(LiveBackend, MalformedBody) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  SleepLog log;
  LiveBackend backend(live_config(server, log));
  EXPECT_EQ(code_of([&] { (void)backend.complete(sample_request()); }),
            ErrorCode::MalformedResponse);
}

TEST(LiveBackend, BoundsRequestsInFlight) {
  std::atomic<int> current{0}, peak{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    res.set_content(ok_body("ok", 1, 1, 2), "application/json");
  });
  SleepLog log;
  auto config = live_config(server, log);
  config.max_inflight = 2;
  LiveBackend backend(config);
  parallel_for(8, 8, [&](std::size_t) { (void)backend.complete(sample_request()); });
  EXPECT_EQ(server.hits(), 8);
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(LiveBackend, MissingKeyAndBackoffFormula) {
  LiveConfig c;
  c.api_key_env = "METAQA_SURELY_UNSET_VARIABLE";
  EXPECT_EQ(code_of([&] { LiveBackend b(c); }), ErrorCode::AuthFailure);
  using ms = std::chrono::milliseconds;
  EXPECT_EQ(backoff_delay(ms(1000), 1, 1.0), ms(1000));
  EXPECT_EQ(backoff_delay(ms(1000), 2, 1.0), ms(2000));
  EXPECT_EQ(backoff_delay(ms(1000), 3, 0.8), ms(3200));
  const auto e = parse_endpoint("https://api.example.com/v1/chat/completions");
  EXPECT_EQ(e.origin, "https://api.example.com");
  EXPECT_EQ(e.path, "/v1/chat/completions");
}

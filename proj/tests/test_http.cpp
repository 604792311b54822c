#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <deque>
#include <thread>

#include "fable/error.hpp"
#include "fable/http_backends.hpp"

using namespace fable;
using namespace std::chrono_literals;

namespace {

/// Replays scripted responses; "throw" entries simulate connection failures.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}

    HttpResponse post(const std::string&, const std::string& body,
                      const std::map<std::string, std::string>& headers,
                      std::chrono::milliseconds) override {
        std::lock_guard lock(mutex_);
        ++calls;
        last_body = body;
        last_headers = headers;
        if (script_.empty()) {
            return {200, R"({"score":0.5})"};
        }
        auto next = script_.front();
        script_.pop_front();
        if (next.status < 0) {
            throw TransportError("connection refused");
        }
        return next;
    }

    int calls = 0;
    std::string last_body;
    std::map<std::string, std::string> last_headers;

private:
    std::mutex mutex_;
    std::deque<HttpResponse> script_;
};

/// Sleeps briefly and records the peak number of overlapping posts.
class SlowTransport : public Transport {
public:
    HttpResponse post(const std::string&, const std::string&,
                      const std::map<std::string, std::string>&,
                      std::chrono::milliseconds) override {
        const int now = ++active_;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(3ms);
        --active_;
        return {200, R"({"score":0.25})"};
    }
    std::atomic<int> peak{0};

private:
    std::atomic<int> active_{0};
};

BackendPolicy fast_policy(int retries = 3) {
    BackendPolicy p;
    p.max_retries = retries;
    p.base_delay = 100ms;
    p.backoff_multiplier = 2.0;
    return p;
}

}  // namespace

TEST_CASE("policy backoff schedule") {
    auto p = fast_policy();
    CHECK(p.delay_for(1) == 100ms);
    CHECK(p.delay_for(2) == 200ms);
    CHECK(p.delay_for(3) == 400ms);
    CHECK(is_retryable_status(503));
    CHECK(is_retryable_status(429));
    CHECK(is_retryable_status(408));
    CHECK_FALSE(is_retryable_status(400));
    CHECK(split_url("http://h:8/a/b") == std::pair<std::string, std::string>{"http://h:8", "/a/b"});
    CHECK_THROWS_AS(split_url("h/a"), ValidationError);
}

TEST_CASE("retries transient failures with exponential backoff") {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<HttpResponse>{{503, ""}, {-1, ""}, {429, ""}, {200, R"({"ok":true})"}});
    std::vector<std::chrono::milliseconds> sleeps;
    RetryingClient client(transport, fast_policy(), [&](auto d) { sleeps.push_back(d); });
    auto out = client.post_json("http://x/y", {{"a", 1}}, std::string("tok"));
    CHECK(out.at("ok") == true);
    CHECK(transport->calls == 4);
    CHECK(client.total_retries() == 3);
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{100ms, 200ms, 400ms});
    CHECK(transport->last_headers.at("Authorization") == "Bearer tok");
}

TEST_CASE("non-retryable status fails immediately; exhausted retries are retryable errors") {
    auto t400 = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{400, "bad"}});
    RetryingClient c400(t400, fast_policy(), [](auto) {});
    try {
        c400.post_json("http://x/y", {}, std::nullopt);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK_FALSE(e.retryable());
    }
    CHECK(t400->calls == 1);

    auto t500 = std::make_shared<ScriptedTransport>(
        std::deque<HttpResponse>{{500, ""}, {500, ""}, {500, ""}});
    RetryingClient c500(t500, fast_policy(2), [](auto) {});
    try {
        c500.post_json("http://x/y", {}, std::nullopt);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.retryable());
    }
    CHECK(t500->calls == 3);
}

TEST_CASE("in-flight requests never exceed max_concurrency") {
    auto transport = std::make_shared<SlowTransport>();
    auto policy = fast_policy();
    policy.max_concurrency = 2;
    auto client = std::make_shared<RetryingClient>(transport, policy, [](auto) {});
    HttpScorer scorer({"http://x/score", std::nullopt, ""}, client, ScoreNormalization::identity);
    std::vector<std::pair<std::string, std::string>> pairs(24, {"a", "b"});
    auto scores = score_batch(scorer, pairs, 8);
    CHECK(scores.size() == 24);
    CHECK(transport->peak.load() <= 2);
}

TEST_CASE("wire format against a loopback server") {
    httplib::Server server;
    std::mutex mutex;
    nlohmann::json seen_chat, seen_score, seen_embed;
    std::string seen_auth;
    server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex);
        seen_chat = nlohmann::json::parse(req.body);
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hi there"}}]})",
                        "application/json");
    });
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex);
        seen_score = nlohmann::json::parse(req.body);
        res.set_content(R"({"score":2.0})", "application/json");
    });
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex);
        seen_embed = nlohmann::json::parse(req.body);
        res.set_content(R"({"data":[{"embedding":[0.5,-1.0,2.0]}]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    std::map<std::string, std::string> env{{"FABLE_GEN_URL", base + "/chat"},
                                           {"FABLE_GEN_TOKEN", "secret"},
                                           {"FABLE_GEN_MODEL", "m1"},
                                           {"FABLE_SCORE_URL", base + "/score"},
                                           {"FABLE_EMBED_URL", base + "/embed"}};
    auto lookup = [&](const std::string& k) -> std::optional<std::string> {
        auto it = env.find(k);
        return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    auto backends = make_http_backends(fast_policy(), ScoreNormalization::logistic, lookup);

    ChatRequest req;
    req.messages = {{Role::user, "summarize"}, {Role::assistant, "s"}, {Role::user, "again"}};
    req.temperature = 0.7;
    req.max_tokens = 64;
    req.seed = 9;
    CHECK(backends.generator->generate(req) == "hi there");
    CHECK(backends.scorer->score("a", "b") == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(backends.embedder->embed("t") == std::vector<double>{0.5, -1.0, 2.0});
    CHECK(backends.embedder->dimension() == 3);

    server.stop();
    worker.join();

    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_chat.at("model") == "m1");
    CHECK(seen_chat.at("messages").size() == 3);
    CHECK(seen_chat.at("messages")[1].at("role") == "assistant");
    CHECK(seen_chat.at("messages")[2].at("content") == "again");
    CHECK(seen_chat.at("temperature") == 0.7);
    CHECK(seen_chat.at("max_tokens") == 64);
    CHECK(seen_chat.at("seed") == 9);
    CHECK(seen_score == nlohmann::json{{"text_a", "a"}, {"text_b", "b"}});
    CHECK(seen_embed == nlohmann::json{{"text", "t"}});
}

TEST_CASE("unreachable server surfaces a retryable backend error") {
    auto policy = fast_policy(1);
    policy.base_delay = 1ms;
    policy.timeout = 200ms;
    auto client = std::make_shared<RetryingClient>(std::make_shared<HttplibTransport>(), policy);
    HttpScorer scorer({"http://127.0.0.1:1/score", std::nullopt, ""}, client,
                      ScoreNormalization::identity);
    try {
        scorer.score("a", "b");
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.retryable());
    }
}

#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "fable/backends.hpp"

namespace fable {

/// Concurrency, retry, and timeout policy shared by the remote backends.
/// Only transport failures and 408/429/5xx responses are retried.
struct BackendPolicy {
    std::size_t max_concurrency = 4;
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds timeout{60000};

    void validate() const;
    /// Delay before retry number `retry` (1-based).
    std::chrono::milliseconds delay_for(int retry) const;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// One POST of a JSON body. Connection-level failures throw TransportError.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::map<std::string, std::string>& headers,
                              std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; supports http:// and https:// URLs.
class HttplibTransport : public Transport {
public:
    HttpResponse post(const std::string& url, const std::string& body,
                      const std::map<std::string, std::string>& headers,
                      std::chrono::milliseconds timeout) override;
};

/// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

bool is_retryable_status(int status);

/// JSON-over-HTTP client applying a BackendPolicy: bounded in-flight requests,
/// exponential backoff, bearer-token auth.
class RetryingClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingClient(std::shared_ptr<Transport> transport, BackendPolicy policy,
                   Sleeper sleeper = {});

    nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                             const std::optional<std::string>& token) const;

    /// Retries issued so far across all calls.
    std::size_t total_retries() const { return retries_.load(); }
    const BackendPolicy& policy() const { return policy_; }

private:
    std::shared_ptr<Transport> transport_;
    BackendPolicy policy_;
    Sleeper sleeper_;
    mutable std::counting_semaphore<> slots_;
    mutable std::atomic<std::size_t> retries_{0};
};

struct Endpoint {
    std::string url;
    std::optional<std::string> token;
    std::string model;
};

/// Chat-completion client. Request body:
/// {"model"?, "messages": [{"role", "content"}], "temperature", "max_tokens", "seed"?}.
/// Accepts OpenAI-style {"choices": [{"message": {"content"}}]} or {"text"} responses.
class HttpGenerator : public Generator {
public:
    HttpGenerator(Endpoint endpoint, std::shared_ptr<RetryingClient> client);
    std::string id() const override;

protected:
    std::string do_generate(const ChatRequest& request) override;

private:
    Endpoint endpoint_;
    std::shared_ptr<RetryingClient> client_;
};

/// Cross-encoder client. Request {"text_a", "text_b"}, response {"score": raw};
/// raw values pass through the configured normalization.
class HttpScorer : public Scorer {
public:
    HttpScorer(Endpoint endpoint, std::shared_ptr<RetryingClient> client,
               ScoreNormalization normalization);
    std::string id() const override;

protected:
    double do_score(std::string_view text_a, std::string_view text_b) override;

private:
    Endpoint endpoint_;
    std::shared_ptr<RetryingClient> client_;
    ScoreNormalization normalization_;
};

/// Embedding client. Request {"text"}, response {"vector": [...]} or
/// OpenAI-style {"data": [{"embedding": [...]}]}. A dimension of 0 is fixed by
/// the first response.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(Endpoint endpoint, std::shared_ptr<RetryingClient> client,
                 std::size_t dimension = 0);
    std::size_t dimension() const override;
    std::string id() const override;

protected:
    std::vector<double> do_embed(std::string_view text) override;

private:
    Endpoint endpoint_;
    std::shared_ptr<RetryingClient> client_;
    mutable std::mutex mutex_;
    std::size_t dimension_;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Builds remote backends from FABLE_GEN_URL / FABLE_SCORE_URL / FABLE_EMBED_URL and the
/// optional FABLE_*_TOKEN, FABLE_GEN_MODEL, FABLE_EMBED_DIM variables. Roles whose URL
/// is unset are left null.
BackendSet make_http_backends(const BackendPolicy& policy, ScoreNormalization normalization,
                              const EnvLookup& env = process_env,
                              std::shared_ptr<Transport> transport = nullptr);

}  // namespace fable

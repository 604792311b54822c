#include "fable/http_backends.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "fable/error.hpp"

namespace fable {

using nlohmann::json;

void BackendPolicy::validate() const {
    if (max_concurrency < 1) {
        throw ValidationError("backend max_concurrency must be >= 1");
    }
    if (max_retries < 0) {
        throw ValidationError("backend max_retries must be >= 0");
    }
    if (base_delay.count() < 0 || backoff_multiplier < 1.0) {
        throw ValidationError("backoff needs base delay >= 0 and multiplier >= 1");
    }
    if (timeout.count() <= 0) {
        throw ValidationError("backend timeout must be > 0");
    }
}

std::chrono::milliseconds BackendPolicy::delay_for(int retry) const {
    const double factor = std::pow(backoff_multiplier, std::max(retry - 1, 0));
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(base_delay.count()) * factor));
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("URL '" + url + "' lacks a scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::map<std::string, std::string>& headers,
                                    std::chrono::milliseconds timeout) {
    const auto [base, path] = split_url(url);
    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) {
        hdrs.emplace(k, v);
    }
    auto result = client.Post(path, hdrs, body, "application/json");
    if (!result) {
        throw TransportError("POST " + url + " failed: " + httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
}

RetryingClient::RetryingClient(std::shared_ptr<Transport> transport, BackendPolicy policy,
                               Sleeper sleeper)
    : transport_(std::move(transport)),
      policy_(policy),
      sleeper_(std::move(sleeper)),
      slots_(static_cast<std::ptrdiff_t>(policy.max_concurrency)) {
    policy_.validate();
    if (!transport_) {
        throw ValidationError("RetryingClient needs a transport");
    }
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

json RetryingClient::post_json(const std::string& url, const json& body,
                               const std::optional<std::string>& token) const {
    std::map<std::string, std::string> headers{{"Accept", "application/json"}};
    if (token && !token->empty()) {
        headers["Authorization"] = "Bearer " + *token;
    }
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
        if (attempt > 0) {
            ++retries_;
            sleeper_(policy_.delay_for(attempt));
        }
        HttpResponse response;
        slots_.acquire();
        try {
            response = transport_->post(url, payload, headers, policy_.timeout);
        } catch (const TransportError& e) {
            slots_.release();
            last_error = e.what();
            continue;
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        if (response.status >= 200 && response.status < 300) {
            try {
                return json::parse(response.body);
            } catch (const json::exception& e) {
                throw BackendError("POST " + url + ": response is not JSON: " + e.what());
            }
        }
        last_error = "POST " + url + " returned HTTP " + std::to_string(response.status);
        if (!is_retryable_status(response.status)) {
            throw BackendError(last_error, false);
        }
    }
    throw BackendError(last_error + " (gave up after " + std::to_string(policy_.max_retries) +
                           " retries)",
                       true);
}

HttpGenerator::HttpGenerator(Endpoint endpoint, std::shared_ptr<RetryingClient> client)
    : endpoint_(std::move(endpoint)), client_(std::move(client)) {}

std::string HttpGenerator::id() const {
    return "http-gen:" + (endpoint_.model.empty() ? endpoint_.url : endpoint_.model);
}

std::string HttpGenerator::do_generate(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back(json{{"role", to_string(m.role)}, {"content", m.text}});
    }
    json body{{"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (!endpoint_.model.empty()) {
        body["model"] = endpoint_.model;
    }
    if (request.seed) {
        body["seed"] = *request.seed;
    }
    const json response = client_->post_json(endpoint_.url, body, endpoint_.token);
    try {
        if (response.contains("choices")) {
            const auto& choice = response.at("choices").at(0);
            if (choice.contains("message")) {
                const auto& content = choice.at("message").at("content");
                return content.is_null() ? std::string() : content.get<std::string>();
            }
            return choice.at("text").get<std::string>();
        }
        return response.at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("unexpected generation response shape: ") + e.what());
    }
}

HttpScorer::HttpScorer(Endpoint endpoint, std::shared_ptr<RetryingClient> client,
                       ScoreNormalization normalization)
    : endpoint_(std::move(endpoint)), client_(std::move(client)), normalization_(normalization) {}

std::string HttpScorer::id() const {
    return "http-score:" + (endpoint_.model.empty() ? endpoint_.url : endpoint_.model);
}

double HttpScorer::do_score(std::string_view text_a, std::string_view text_b) {
    const json response =
        client_->post_json(endpoint_.url, json{{"text_a", text_a}, {"text_b", text_b}},
                           endpoint_.token);
    try {
        return normalize_score(response.at("score").get<double>(), normalization_);
    } catch (const json::exception& e) {
        throw BackendError(std::string("unexpected score response shape: ") + e.what());
    }
}

HttpEmbedder::HttpEmbedder(Endpoint endpoint, std::shared_ptr<RetryingClient> client,
                           std::size_t dimension)
    : endpoint_(std::move(endpoint)), client_(std::move(client)), dimension_(dimension) {}

std::size_t HttpEmbedder::dimension() const {
    std::lock_guard lock(mutex_);
    return dimension_;
}

std::string HttpEmbedder::id() const {
    return "http-embed:" + (endpoint_.model.empty() ? endpoint_.url : endpoint_.model);
}

std::vector<double> HttpEmbedder::do_embed(std::string_view text) {
    const json response =
        client_->post_json(endpoint_.url, json{{"text", text}}, endpoint_.token);
    std::vector<double> vec;
    try {
        if (response.contains("data")) {
            vec = response.at("data").at(0).at("embedding").get<std::vector<double>>();
        } else {
            vec = response.at("vector").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("unexpected embedding response shape: ") + e.what());
    }
    std::lock_guard lock(mutex_);
    if (dimension_ == 0) {
        dimension_ = vec.size();
    }
    return vec;
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* value = std::getenv(name.c_str()); value != nullptr && *value != '\0') {
        return std::string(value);
    }
    return std::nullopt;
}

BackendSet make_http_backends(const BackendPolicy& policy, ScoreNormalization normalization,
                              const EnvLookup& env, std::shared_ptr<Transport> transport) {
    if (!transport) {
        transport = std::make_shared<HttplibTransport>();
    }
    auto client = std::make_shared<RetryingClient>(transport, policy);
    BackendSet set;
    if (auto url = env("FABLE_GEN_URL")) {
        set.generator = std::make_shared<HttpGenerator>(
            Endpoint{*url, env("FABLE_GEN_TOKEN"), env("FABLE_GEN_MODEL").value_or("")}, client);
    }
    if (auto url = env("FABLE_SCORE_URL")) {
        set.scorer = std::make_shared<HttpScorer>(Endpoint{*url, env("FABLE_SCORE_TOKEN"), ""},
                                                  client, normalization);
    }
    if (auto url = env("FABLE_EMBED_URL")) {
        std::size_t dim = 0;
        if (auto d = env("FABLE_EMBED_DIM")) {
            dim = static_cast<std::size_t>(std::stoul(*d));
        }
        set.embedder = std::make_shared<HttpEmbedder>(
            Endpoint{*url, env("FABLE_EMBED_TOKEN"), ""}, client, dim);
    }
    return set;
}

}  // namespace fable

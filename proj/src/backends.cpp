#include "fable/backends.hpp"

#include <cctype>
#include <cmath>

#include "fable/error.hpp"
#include "fable/hashing.hpp"
#include "fable/parallel.hpp"
#include "fable/random.hpp"

namespace fable {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

Role parse_role(std::string_view text) {
    if (text == "system") return Role::system;
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    throw ValidationError("unknown chat role '" + std::string(text) + "'");
}

void ChatRequest::validate() const {
    if (!(temperature >= 0.0)) {
        throw ValidationError("chat request temperature must be >= 0");
    }
    if (max_tokens <= 0) {
        throw ValidationError("chat request max_tokens must be > 0");
    }
    std::size_t start = 0;
    if (!messages.empty() && messages.front().role == Role::system) {
        start = 1;
    }
    bool has_user = false;
    for (std::size_t i = start; i < messages.size(); ++i) {
        const Role expected = ((i - start) % 2 == 0) ? Role::user : Role::assistant;
        if (messages[i].role != expected) {
            throw ValidationError("chat request roles must alternate user/assistant (message " +
                                  std::to_string(i) + " is " +
                                  std::string(to_string(messages[i].role)) + ")");
        }
        has_user = has_user || messages[i].role == Role::user;
    }
    if (!has_user) {
        throw ValidationError("chat request needs at least one user message");
    }
}

std::string ChatRequest::canonical_messages() const {
    std::string out;
    for (const auto& m : messages) {
        out += to_string(m.role);
        out += '\x1f';
        out += m.text;
        out += '\x1e';
    }
    return out;
}

std::string Generator::generate(const ChatRequest& request) {
    request.validate();
    std::string text = do_generate(request);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw EmptyCompletionError();
    }
    return text;
}

double Scorer::score(std::string_view text_a, std::string_view text_b) {
    if (text_a.empty() || text_b.empty()) {
        throw ValidationError("score requires two non-empty texts");
    }
    const double value = do_score(text_a, text_b);
    if (!(value >= 0.0 && value <= 1.0)) {
        throw BackendError("scorer " + id() + " returned " + std::to_string(value) +
                           " outside [0,1]; configure a normalization");
    }
    return value;
}

std::vector<double> Embedder::embed(std::string_view text) {
    if (text.empty()) {
        throw ValidationError("embed requires non-empty text");
    }
    auto vec = do_embed(text);
    if (vec.size() != dimension()) {
        throw BackendError("embedder " + id() + " returned dimension " +
                           std::to_string(vec.size()) + ", expected " +
                           std::to_string(dimension()));
    }
    return vec;
}

ScoreNormalization parse_normalization(std::string_view text) {
    if (text == "identity") return ScoreNormalization::identity;
    if (text == "logistic") return ScoreNormalization::logistic;
    throw ValidationError("unknown score normalization '" + std::string(text) + "'");
}

double normalize_score(double raw, ScoreNormalization normalization) {
    switch (normalization) {
        case ScoreNormalization::identity: return raw;
        case ScoreNormalization::logistic: return 1.0 / (1.0 + std::exp(-raw));
    }
    return raw;
}

std::vector<std::string> generate_batch(Generator& generator, std::span<const ChatRequest> requests,
                                        std::size_t max_concurrency) {
    return parallel_map(requests.size(), max_concurrency,
                        [&](std::size_t i) { return generator.generate(requests[i]); });
}

std::vector<double> score_batch(Scorer& scorer,
                                std::span<const std::pair<std::string, std::string>> pairs,
                                std::size_t max_concurrency) {
    return parallel_map(pairs.size(), max_concurrency, [&](std::size_t i) {
        return scorer.score(pairs[i].first, pairs[i].second);
    });
}

std::vector<std::vector<double>> embed_batch(Embedder& embedder,
                                             std::span<const std::string> texts,
                                             std::size_t max_concurrency) {
    return parallel_map(texts.size(), max_concurrency,
                        [&](std::size_t i) { return embedder.embed(texts[i]); });
}

std::string MockGenerator::do_generate(const ChatRequest& request) {
    return "GEN[" + short_digest(request.canonical_messages()) + ":" +
           std::to_string(request.seed.value_or(0)) + "]";
}

double MockScorer::do_score(std::string_view text_a, std::string_view text_b) {
    if (text_a == text_b) {
        return 1.0;
    }
    std::string key(text_a);
    key += '\x1f';
    key += text_b;
    Rng rng(derive_seed(seed_, key));
    return rng.uniform_real();
}

void ScriptedScorer::set(std::string a, std::string b, double value) {
    std::lock_guard lock(mutex_);
    pairs_[{std::move(a), std::move(b)}] = value;
}

void ScriptedScorer::set_for_text(std::string b, double value) {
    std::lock_guard lock(mutex_);
    by_text_[std::move(b)] = value;
}

std::size_t ScriptedScorer::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

double ScriptedScorer::do_score(std::string_view text_a, std::string_view text_b) {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (auto it = pairs_.find({std::string(text_a), std::string(text_b)}); it != pairs_.end()) {
        return it->second;
    }
    if (auto it = by_text_.find(std::string(text_b)); it != by_text_.end()) {
        return it->second;
    }
    if (fallback_) {
        return *fallback_;
    }
    throw BackendError("scripted scorer has no entry for the requested pair");
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension == 0) {
        throw ValidationError("embedding dimension must be > 0");
    }
}

std::size_t HashingEmbedder::bucket_of(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a64(token, derive_seed(seed_, "bucket")) % dimension_);
}

std::vector<double> HashingEmbedder::do_embed(std::string_view text) {
    std::vector<double> vec(dimension_, 0.0);
    for (const auto& token : tokenize(text)) {
        const bool negative = (fnv1a64(token, derive_seed(seed_, "sign")) & 1U) != 0;
        vec[bucket_of(token)] += negative ? -1.0 : 1.0;
    }
    return vec;
}

RandomEmbedder::RandomEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension == 0) {
        throw ValidationError("embedding dimension must be > 0");
    }
}

std::vector<double> RandomEmbedder::do_embed(std::string_view text) {
    Rng rng(derive_seed(seed_, text));
    std::vector<double> vec(dimension_);
    for (auto& x : vec) {
        x = rng.normal();
    }
    return vec;
}

BackendSet make_mock_backends(std::uint64_t seed, std::size_t embed_dimension) {
    return BackendSet{std::make_shared<MockGenerator>(), std::make_shared<MockScorer>(seed),
                      std::make_shared<HashingEmbedder>(embed_dimension, seed)};
}

}  // namespace fable

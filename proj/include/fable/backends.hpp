#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fable {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatMessage {
    Role role = Role::user;
    std::string text;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    std::optional<std::uint64_t> seed;

    /// At least one user message; after an optional leading system message the
    /// roles alternate user/assistant starting with user; temperature >= 0; max_tokens > 0.
    void validate() const;

    /// Stable text form of the messages, used for hashing.
    std::string canonical_messages() const;
};

/// Chat-completion backend. `generate` validates the request and rejects empty output;
/// implementations supply `do_generate`.
class Generator {
public:
    virtual ~Generator() = default;
    std::string generate(const ChatRequest& request);
    virtual std::string id() const = 0;

protected:
    virtual std::string do_generate(const ChatRequest& request) = 0;
};

/// Pairwise relevance scorer (cross-encoder style) returning values in [0, 1].
class Scorer {
public:
    virtual ~Scorer() = default;
    double score(std::string_view text_a, std::string_view text_b);
    virtual std::string id() const = 0;

protected:
    virtual double do_score(std::string_view text_a, std::string_view text_b) = 0;
};

/// Text embedder with a fixed output dimension.
class Embedder {
public:
    virtual ~Embedder() = default;
    std::vector<double> embed(std::string_view text);
    virtual std::size_t dimension() const = 0;
    virtual std::string id() const = 0;

protected:
    virtual std::vector<double> do_embed(std::string_view text) = 0;
};

enum class ScoreNormalization { identity, logistic };

ScoreNormalization parse_normalization(std::string_view text);

/// Maps a raw scorer output into [0, 1]. Identity clamps nothing and leaves
/// out-of-range values for the caller to reject.
double normalize_score(double raw, ScoreNormalization normalization);

// Order-preserving batched calls with bounded parallelism.
std::vector<std::string> generate_batch(Generator& generator, std::span<const ChatRequest> requests,
                                        std::size_t max_concurrency);
std::vector<double> score_batch(Scorer& scorer,
                                std::span<const std::pair<std::string, std::string>> pairs,
                                std::size_t max_concurrency);
std::vector<std::vector<double>> embed_batch(Embedder& embedder,
                                             std::span<const std::string> texts,
                                             std::size_t max_concurrency);

/// Deterministic generator: returns "GEN[<h>:<seed>]" where h is the short digest of
/// the request's canonical messages and seed is the request seed (0 when unset).
class MockGenerator : public Generator {
public:
    std::string id() const override { return "mock-gen"; }

protected:
    std::string do_generate(const ChatRequest& request) override;
};

/// Deterministic scorer: 1.0 for identical texts, otherwise a hash-derived value
/// in [0, 1) that is a pure function of (text_a, text_b, seed).
class MockScorer : public Scorer {
public:
    explicit MockScorer(std::uint64_t seed = 0) : seed_(seed) {}
    std::string id() const override { return "mock-score"; }

protected:
    double do_score(std::string_view text_a, std::string_view text_b) override;

private:
    std::uint64_t seed_;
};

/// Table-driven scorer for fixtures. Lookup order: exact (a, b) pair, then the
/// second text alone, then the fallback; a miss with no fallback throws.
class ScriptedScorer : public Scorer {
public:
    ScriptedScorer() = default;
    explicit ScriptedScorer(std::optional<double> fallback) : fallback_(fallback) {}

    void set(std::string a, std::string b, double value);
    void set_for_text(std::string b, double value);
    std::size_t calls() const;
    std::string id() const override { return "scripted-score"; }

protected:
    double do_score(std::string_view text_a, std::string_view text_b) override;

private:
    std::map<std::pair<std::string, std::string>, double> pairs_;
    std::map<std::string, double> by_text_;
    std::optional<double> fallback_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

/// Seeded feature hashing of lower-cased alphanumeric tokens into `dimension`
/// signed buckets.
class HashingEmbedder : public Embedder {
public:
    HashingEmbedder(std::size_t dimension, std::uint64_t seed);
    std::size_t dimension() const override { return dimension_; }
    std::string id() const override { return "mock-embed-hash"; }

    /// Bucket a token falls into; exposed so fixtures can pick non-colliding tokens.
    std::size_t bucket_of(std::string_view token) const;

protected:
    std::vector<double> do_embed(std::string_view text) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// Gaussian vectors seeded by (text, seed): unrelated texts get independent
/// random directions. Used for random-baseline checks.
class RandomEmbedder : public Embedder {
public:
    RandomEmbedder(std::size_t dimension, std::uint64_t seed);
    std::size_t dimension() const override { return dimension_; }
    std::string id() const override { return "mock-embed-random"; }

protected:
    std::vector<double> do_embed(std::string_view text) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

struct BackendSet {
    std::shared_ptr<Generator> generator;
    std::shared_ptr<Scorer> scorer;
    std::shared_ptr<Embedder> embedder;
};

/// Mock backends for offline and CI runs.
BackendSet make_mock_backends(std::uint64_t seed, std::size_t embed_dimension = 64);

}  // namespace fable

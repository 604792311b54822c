#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fable/backends.hpp"
#include "fable/metrics.hpp"
#include "fable/types.hpp"

namespace fable {

enum class Similarity { cosine, negative_euclidean };

Similarity parse_similarity(std::string_view text);
std::string_view to_string(Similarity similarity);

struct EvalConfig {
    std::vector<double> ndcg_percents{0.10, 0.20};
    Gain gain = Gain::linear;
    /// Relevant for MAP iff relevance >= map_threshold.
    int map_threshold = 1;
    Similarity similarity = Similarity::cosine;

    void validate() const;
    /// Metric names in report order, e.g. {"ndcg_%10", "ndcg_%20", "map"}.
    std::vector<std::string> metric_names() const;
};

using EmbeddingTable = std::unordered_map<std::string, std::vector<double>>;

/// Reads {"id", "vector"} records. Rejects duplicate ids and ragged dimensions.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, std::span<const std::string> ids,
                      const EmbeddingTable& table);

/// Embeds documents with `embedder` into a table keyed by document id.
EmbeddingTable embed_documents(std::span<const Document> docs, Embedder& embedder,
                               std::size_t concurrency = 1);

double similarity(std::span<const double> a, std::span<const double> b, Similarity kind);

struct RankedCandidate {
    std::string doc_id;
    double similarity = 0.0;
    int relevance = 0;
    bool operator==(const RankedCandidate&) const = default;
};

/// Candidates sorted by similarity to the query, descending; ties by ascending doc_id.
std::vector<RankedCandidate> rank_pool(const RelevancePool& pool, const EmbeddingTable& embeddings,
                                       const EvalConfig& config);

struct QueryResult {
    std::string facet;
    std::string query_id;
    std::vector<std::size_t> cutoffs;
    std::vector<double> ndcg;
    double average_precision = 0.0;
    std::vector<RankedCandidate> ranking;
};

struct MetricMeans {
    std::vector<double> ndcg;
    double map = 0.0;
    std::size_t queries = 0;
};

struct EvalReport {
    EvalConfig config;
    std::vector<QueryResult> per_query;
    std::map<std::string, MetricMeans> per_facet;
    /// Unweighted mean over every query of every facet.
    MetricMeans aggregated;
    std::vector<std::string> warnings;
    std::string manifest;

    /// Metric value of one query by name ("ndcg_%20", "map").
    double metric(const QueryResult& q, const std::string& name) const;
};

nlohmann::json to_json_value(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Ranks and scores every pool. Throws ValidationError listing missing ids
/// when embeddings do not cover the pools.
EvalReport evaluate_run(std::span<const RelevancePool> pools, const EmbeddingTable& embeddings,
                        const EvalConfig& config);

struct QueryDelta {
    std::string facet;
    std::string query_id;
    std::map<std::string, double> delta;  ///< b - a per metric
};

struct RunComparison {
    std::vector<QueryDelta> per_query;
    /// Fraction of queries where b >= a, per metric.
    std::map<std::string, double> fraction_non_decreasing;
};

/// Compares two reports over the same (facet, query) set.
RunComparison compare_runs(const EvalReport& a, const EvalReport& b);

nlohmann::json to_json_value(const RunComparison& comparison);

}  // namespace fable

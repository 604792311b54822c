#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fable/backends.hpp"
#include "fable/types.hpp"

namespace fable {

/// One benchmark item seen through a single facet.
struct BenchItem {
    std::string id;
    std::string type;
    std::string text;
};

/// Items for `facet`, sorted by id. Items sharing identical facet text are
/// collapsed onto the lowest id. Documents without a label for the facet are rejected.
std::vector<BenchItem> facet_items(std::span<const Document> docs, const std::string& facet);

using ScoreMatrix = std::vector<std::vector<double>>;

/// matrix[i][j] = score(text_i, text_j) for i != j; the diagonal is unused.
ScoreMatrix score_matrix(std::span<const BenchItem> items, Scorer& scorer,
                         std::size_t concurrency = 1);

/// Population standard deviation of each item's scores against all other items.
std::vector<double> score_dispersion(const ScoreMatrix& matrix);

/// The k items with the largest dispersion (ties by ascending id). With a type
/// balance, each type contributes exactly its count; the counts must sum to k.
std::vector<std::string> select_queries(
    std::span<const BenchItem> items, std::span<const double> dispersion, std::size_t k,
    const std::optional<std::map<std::string, std::size_t>>& type_balance = std::nullopt);

/// Scores the items pairwise with `scorer`, then selects as above.
std::vector<std::string> select_queries(
    std::span<const BenchItem> items, std::size_t k, Scorer& scorer,
    const std::optional<std::map<std::string, std::size_t>>& type_balance = std::nullopt,
    std::size_t concurrency = 1);

struct CandidateSelection {
    std::vector<std::string> ids;
    /// True when m reached or exceeded the items left after removing queries.
    bool saturated = false;
};

/// Top-m non-query items by dispersion (ties by ascending id); all remaining
/// items when m is at least the remainder.
CandidateSelection select_candidates(std::span<const BenchItem> items,
                                     std::span<const double> dispersion,
                                     std::span<const std::string> queries, std::size_t m);

/// One unannotated pool (relevance 0) per query, sharing the candidate set.
std::vector<RelevancePool> build_pools(const std::string& facet, std::span<const BenchItem> items,
                                       std::span<const double> dispersion,
                                       std::span<const std::string> queries,
                                       const CandidateSelection& candidates);

/// Kendall's tau-b, Spearman's rho (average ranks for ties), Pearson's r.
/// Undefined statistics (zero variance) are NaN.
struct Agreement {
    double kendall_tau_b;
    double spearman_rho;
    double pearson_r;
};

Agreement agreement(std::span<const int> labels_a, std::span<const int> labels_b);
Agreement agreement(const AnnotatorLabels& labels_a, const AnnotatorLabels& labels_b);

nlohmann::json to_json_value(const Agreement& agreement);

double kendall_tau_b(std::span<const double> a, std::span<const double> b);
double spearman_rho(std::span<const double> a, std::span<const double> b);
double pearson_r(std::span<const double> a, std::span<const double> b);
/// 1-based ranks with ties given their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Ratings of one annotator keyed by query id, read from
/// {"query_id", "doc_id", "rating"} records.
using AnnotationSet = std::map<std::string, AnnotatorLabels>;

AnnotationSet load_annotations(const std::filesystem::path& path);

/// Attaches per-annotator labels to each pool and sets relevance to the
/// round-half-up mean of the available ratings.
void apply_annotations(std::vector<RelevancePool>& pools,
                       std::span<const AnnotationSet> annotators);

/// Agreement between two annotators over every (query, candidate) both rated
/// in the given pools.
Agreement pooled_agreement(std::span<const RelevancePool> pools, const AnnotationSet& a,
                           const AnnotationSet& b);

}  // namespace fable

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fable/backends.hpp"
#include "fable/decompose.hpp"
#include "fable/prompts.hpp"
#include "fable/synthesize.hpp"
#include "fable/types.hpp"

namespace fable {

enum class OverCeilingPolicy { keep_warn, drop };

OverCeilingPolicy parse_over_ceiling_policy(std::string_view text);
std::string_view to_string(OverCeilingPolicy policy);

/// Thresholds for the hard-negative loop. Comparisons are strict-less at both
/// thresholds: easy = score < easy_threshold, hard = score < hard_ceiling.
struct MiningConfig {
    double easy_threshold = 0.25;
    double hard_ceiling = 0.5;
    ScoreBand target_band{0.25, 0.5};
    int max_rounds = 1;
    OverCeilingPolicy over_ceiling_policy = OverCeilingPolicy::keep_warn;

    void validate() const;
};

/// Scores every unscored dissimilar/regenerated unit against its document's
/// summary (or original) unit for the same facet. Other units pass through.
std::vector<FacetUnit> score_negatives(std::span<const FacetUnit> units, Scorer& scorer,
                                       std::size_t concurrency = 1);

struct Classification {
    std::vector<FacetUnit> easy;
    std::vector<FacetUnit> retained;
    std::vector<FacetUnit> over_ceiling;
};

/// Buckets scored units. Throws ValidationError on an unscored unit.
Classification classify(std::span<const FacetUnit> units, const MiningConfig& config);

struct Histogram {
    double bin_width = 0.1;
    std::vector<std::size_t> counts;
};

/// Equal-width bins over [0, 1]; a score of exactly 1 falls in the last bin.
Histogram make_histogram(std::span<const double> scores, std::size_t bins = 10);

struct RoundStats {
    int round = 0;
    std::size_t regenerated = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t carried = 0;
    double mean_score = 0.0;
};

/// Before/after score summary of one mining run.
struct ScoreShiftReport {
    std::size_t scored = 0;
    std::size_t easy = 0;
    std::size_t retained = 0;
    std::size_t over_ceiling = 0;
    std::size_t dropped = 0;
    std::size_t regenerations = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t still_easy = 0;
    std::size_t failures = 0;
    std::size_t supplemental_triplets = 0;
    double mean_before_all = 0.0;
    double mean_before_easy = 0.0;
    double mean_after_regenerated = 0.0;
    Histogram before;
    Histogram after;
    std::vector<RoundStats> rounds;
    MiningConfig config;
};

nlohmann::json to_json_value(const ScoreShiftReport& report);

struct MiningOptions {
    /// Seeds triplet sampling; regeneration requests use synthesis.seed.
    std::uint64_t seed = 0;
    std::size_t concurrency = 1;
    SynthesizeOptions synthesis;
    /// cross_all pairs each accepted negative with every query-positive pair;
    /// sample_one draws one of its compositions per pair.
    TripletMode pairing = TripletMode::cross_all;
    std::string separator = " ";
};

struct MiningResult {
    /// Input units with scores and flags, followed by every regenerated unit.
    std::vector<FacetUnit> units;
    std::vector<FacetUnit> accepted;
    std::vector<PseudoDocument> pseudo_documents;
    /// Supplemental triplets, mode hard_negative.
    std::vector<Triplet> triplets;
    ScoreShiftReport report;
    std::vector<StageFailure> failures;
};

/// Scores negatives, regenerates the easy ones toward the target band (each
/// easy unit once per round, up to max_rounds), rescores, accepts those below
/// the hard ceiling, and recomposes them into supplemental triplets.
/// A regeneration that fails leaves its unit untouched and is reported.
MiningResult mine_hard_negatives(std::span<const Document> docs, std::span<const FacetUnit> units,
                                 const FacetSchema& schema, const PromptSet& prompts,
                                 Generator& generator, Scorer& scorer, const MiningConfig& config,
                                 const MiningOptions& options);

using FacetKindMeans = std::map<std::string, std::map<std::string, double>>;

/// Mean score(document text, unit text) per facet and unit kind, over
/// summary, original and similar units. Throws if a schema facet has none.
FacetKindMeans facet_document_similarity(std::span<const FacetUnit> units,
                                         std::span<const Document> docs,
                                         const FacetSchema& schema, Scorer& scorer,
                                         std::size_t concurrency = 1);

}  // namespace fable

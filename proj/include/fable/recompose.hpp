#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fable/error.hpp"
#include "fable/random.hpp"
#include "fable/types.hpp"

namespace fable {

/// How negatives are paired with query-positive pairs.
struct PairingConfig {
    /// sample_one, cross_all or random_negative.
    TripletMode mode = TripletMode::cross_all;
    std::uint64_t seed = 0;
    double subsample_fraction = 1.0;

    void validate() const;
};

/// Facet units of one document for one generation variant, indexed by schema facet.
struct UnitBundle {
    std::string doc_id;
    std::size_t variant = 0;
    std::vector<std::optional<FacetUnit>> decomposition;
    std::vector<std::optional<FacetUnit>> similar;
    std::vector<std::optional<FacetUnit>> dissimilar;
};

/// Groups units by (document, variant) in order of first appearance.
/// Regenerated units are ignored.
std::vector<UnitBundle> bundle_units(std::span<const FacetUnit> units, const FacetSchema& schema);

/// Variant index encoded in a generated unit id (":v<k>" suffix), 0 when absent.
std::size_t variant_of(const FacetUnit& unit);

/// The document rebuilt from its own decomposition units.
PseudoDocument make_anchor(const UnitBundle& bundle, const FacetSchema& schema,
                           const std::string& target_facet, const std::string& separator = " ");

/// All 2^(n-1) compositions for `target_facet`: the target slot holds the
/// similar unit (positive) or the dissimilar unit (negative); every other slot
/// is independently similar or dissimilar. Schema order throughout.
std::vector<PseudoDocument> enumerate_compositions(const UnitBundle& bundle,
                                                   const FacetSchema& schema,
                                                   const std::string& target_facet,
                                                   Polarity polarity,
                                                   const std::string& separator = " ");

/// As enumerate_compositions(negative) but with `target_unit` (e.g. a
/// regenerated negative) in the target slot.
std::vector<PseudoDocument> enumerate_with_target_unit(const UnitBundle& bundle,
                                                       const FacetSchema& schema,
                                                       const FacetUnit& target_unit,
                                                       const std::string& separator = " ");

struct QueryPositivePair {
    std::string query_ref;
    std::string positive_ref;
    bool operator==(const QueryPositivePair&) const = default;
};

/// Every unordered pair from {anchor} + positives, C(k, 2) for a pool of k.
std::vector<QueryPositivePair> build_query_positive_pairs(
    const PseudoDocument& anchor, std::span<const PseudoDocument> positives);

/// Material for random-negative triplets: foreign-document decomposition units
/// for the target facet are substituted into the target slot of a negative.
struct RandomNegativeSource {
    const UnitBundle& bundle;
    const FacetSchema& schema;
    std::span<const FacetUnit> foreign_units;
    std::string separator = " ";
};

struct AssembledTriplets {
    std::vector<Triplet> triplets;
    /// Negatives built on the fly (random_negative mode).
    std::vector<PseudoDocument> extra_negatives;
};

/// sample_one: one uniformly drawn negative per pair. cross_all: every pair
/// with every negative. random_negative: as sample_one, with the target slot
/// replaced by a random foreign unit from `random_source`.
AssembledTriplets assemble_triplets(std::span<const QueryPositivePair> pairs,
                                    std::span<const PseudoDocument> negatives, TripletMode mode,
                                    Rng& rng, const RandomNegativeSource* random_source = nullptr);

template <typename T>
struct Subsample {
    std::vector<T> items;
    std::optional<std::string> warning;
};

/// Seeded selection of round_half_up(fraction * N) items, original order kept.
template <typename T>
Subsample<T> subsample_documents(const std::vector<T>& items, double fraction,
                                 std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("subsample fraction must lie in (0, 1]");
    }
    Subsample<T> out;
    if (fraction == 1.0) {
        out.items = items;
        return out;
    }
    Rng rng(derive_seed(seed, "subsample"));
    for (auto i : rng.sample_indices(items.size(), round_half_up(fraction * items.size()))) {
        out.items.push_back(items[i]);
    }
    if (out.items.empty()) {
        out.warning = "subsampling " + std::to_string(items.size()) + " documents at " +
                      std::to_string(fraction) + " selects none";
    }
    return out;
}

struct RecomposeOptions {
    PairingConfig pairing;
    std::string separator = " ";
    /// Optional cap on triplets per document across all facets.
    std::optional<std::size_t> per_doc_cap;
};

struct RecomposeResult {
    /// Pseudo-documents referenced by at least one triplet.
    std::vector<PseudoDocument> pseudo_documents;
    std::vector<Triplet> triplets;
    std::size_t documents_used = 0;
    std::map<std::string, std::size_t> triplets_per_facet;
    std::vector<std::string> warnings;
};

/// Stage 3 over a whole unit file. Output order: document, variant, facet,
/// enumeration index. Dissimilar units flagged "dropped" are not used as negatives.
RecomposeResult recompose_corpus(std::span<const FacetUnit> units, const FacetSchema& schema,
                                 const RecomposeOptions& options);

/// Keeps only pseudo-documents referenced by `triplets`, preserving order and
/// removing duplicate ids.
std::vector<PseudoDocument> referenced_pseudo_documents(std::span<const PseudoDocument> docs,
                                                        std::span<const Triplet> triplets);

}  // namespace fable

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fable {

using json = nlohmann::json;

/// Named, ordered facet set. The order fixes how pseudo-documents are concatenated.
struct FacetSchema {
    std::string domain_name;
    std::vector<std::string> facets;

    /// Validates n >= 2 and unique, non-empty facet names.
    static FacetSchema make(std::string domain_name, std::vector<std::string> facets);

    std::optional<std::size_t> index_of(std::string_view facet) const;
    bool contains(std::string_view facet) const { return index_of(facet).has_value(); }
    std::size_t size() const { return facets.size(); }

    bool operator==(const FacetSchema&) const = default;
};

/// Built-in schemas: "abstract" (background, method, result) and
/// "education" (story, question, options).
FacetSchema builtin_schema(std::string_view name);

/// Resolves a built-in name, or reads a JSON file {"domain_name", "facets"}.
FacetSchema resolve_schema(std::string_view name_or_path);

struct Document {
    std::string id;
    std::string text;
    std::map<std::string, std::string> facet_labels;
    json meta = json::object();

    bool has_labels() const { return !facet_labels.empty(); }
    bool operator==(const Document&) const = default;
};

enum class UnitKind { original, summary, similar, dissimilar, regenerated };

struct Provenance {
    std::string backend_id;
    std::string prompt_hash;
    int mining_round = 0;
    /// Decomposition unit (summary/original) a generated unit was conditioned on.
    std::string conditioned_on;
    /// Previous unit in a regeneration chain.
    std::string parent_unit;

    bool operator==(const Provenance&) const = default;
};

struct FacetUnit {
    std::string unit_id;
    std::string doc_id;
    std::string facet;
    UnitKind kind = UnitKind::summary;
    std::string text;
    std::optional<double> score;
    Provenance provenance;
    std::vector<std::string> flags;

    bool is_decomposition() const {
        return kind == UnitKind::original || kind == UnitKind::summary;
    }
    bool is_negative() const {
        return kind == UnitKind::dissimilar || kind == UnitKind::regenerated;
    }
    bool has_flag(std::string_view flag) const;
    bool operator==(const FacetUnit&) const = default;
};

enum class Polarity { anchor, positive, negative };

struct CompositionSlot {
    std::string facet;
    std::string unit_id;
    bool operator==(const CompositionSlot&) const = default;
};

struct PseudoDocument {
    std::string id;
    std::string doc_id;
    std::vector<CompositionSlot> composition;
    std::string target_facet;
    Polarity polarity = Polarity::anchor;
    std::string text;

    const CompositionSlot& slot(std::string_view facet) const;
    bool operator==(const PseudoDocument&) const = default;
};

enum class TripletMode { sample_one, cross_all, random_negative, hard_negative };

struct Triplet {
    std::string target_facet;
    std::string query_ref;
    std::string positive_ref;
    std::string negative_ref;
    TripletMode mode = TripletMode::cross_all;
    std::string doc_id;

    bool operator==(const Triplet&) const = default;
};

struct PoolCandidate {
    std::string doc_id;
    int relevance = 0;
    bool operator==(const PoolCandidate&) const = default;
};

using AnnotatorLabels = std::map<std::string, int>;

struct RelevancePool {
    std::string facet;
    std::string query_id;
    std::vector<PoolCandidate> candidates;
    std::optional<std::vector<AnnotatorLabels>> annotator_labels;
    json meta = json::object();

    /// Checks relevance range, query exclusion, unique candidates, and that
    /// relevance equals the aggregated annotator labels when those are present.
    void validate() const;
    bool operator==(const RelevancePool&) const = default;
};

/// Round-half-up of the mean of integer ratings, computed exactly.
int aggregate_ratings(std::span<const int> ratings);

std::string_view to_string(UnitKind kind);
std::string_view to_string(Polarity polarity);
std::string_view to_string(TripletMode mode);
UnitKind parse_unit_kind(std::string_view text);
Polarity parse_polarity(std::string_view text);
TripletMode parse_triplet_mode(std::string_view text);

void to_json(json& j, const FacetSchema& v);
void from_json(const json& j, FacetSchema& v);
void to_json(json& j, const Document& v);
void from_json(const json& j, Document& v);
void to_json(json& j, const FacetUnit& v);
void from_json(const json& j, FacetUnit& v);
void to_json(json& j, const PseudoDocument& v);
void from_json(const json& j, PseudoDocument& v);
void to_json(json& j, const Triplet& v);
void from_json(const json& j, Triplet& v);
void to_json(json& j, const RelevancePool& v);
void from_json(const json& j, RelevancePool& v);

}  // namespace fable

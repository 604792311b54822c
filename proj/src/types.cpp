#include "fable/types.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "fable/error.hpp"

namespace fable {

namespace {

template <typename T>
T required(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        throw ValidationError(std::string("missing field '") + key + "'");
    }
    return it->get<T>();
}

template <typename T>
T optional_field(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    return it->get<T>();
}

}  // namespace

FacetSchema FacetSchema::make(std::string domain_name, std::vector<std::string> facets) {
    if (facets.size() < 2) {
        throw ValidationError("facet schema '" + domain_name + "' needs at least 2 facets");
    }
    std::set<std::string> seen;
    for (const auto& f : facets) {
        if (f.empty()) {
            throw ValidationError("facet schema '" + domain_name + "' has an empty facet name");
        }
        if (!seen.insert(f).second) {
            throw ValidationError("facet schema '" + domain_name + "' repeats facet '" + f + "'");
        }
    }
    return FacetSchema{std::move(domain_name), std::move(facets)};
}

std::optional<std::size_t> FacetSchema::index_of(std::string_view facet) const {
    for (std::size_t i = 0; i < facets.size(); ++i) {
        if (facets[i] == facet) {
            return i;
        }
    }
    return std::nullopt;
}

FacetSchema builtin_schema(std::string_view name) {
    if (name == "abstract" || name == "scientific") {
        return FacetSchema::make("abstract", {"background", "method", "result"});
    }
    if (name == "education" || name == "toefl") {
        return FacetSchema::make("education", {"story", "question", "options"});
    }
    throw ValidationError("unknown schema '" + std::string(name) +
                          "' (built-ins: abstract, education)");
}

FacetSchema resolve_schema(std::string_view name_or_path) {
    if (name_or_path.find('/') == std::string_view::npos &&
        name_or_path.find(".json") == std::string_view::npos) {
        return builtin_schema(name_or_path);
    }
    std::ifstream in{std::string(name_or_path)};
    if (!in) {
        throw ValidationError("cannot open schema file " + std::string(name_or_path));
    }
    try {
        return json::parse(in).get<FacetSchema>();
    } catch (const json::exception& e) {
        throw ValidationError("malformed schema file " + std::string(name_or_path) + ": " +
                              e.what());
    }
}

bool FacetUnit::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

const CompositionSlot& PseudoDocument::slot(std::string_view facet) const {
    for (const auto& s : composition) {
        if (s.facet == facet) {
            return s;
        }
    }
    throw ValidationError("pseudo-document " + id + " has no slot for facet '" +
                          std::string(facet) + "'");
}

int aggregate_ratings(std::span<const int> ratings) {
    if (ratings.empty()) {
        throw ValidationError("cannot aggregate an empty rating set");
    }
    long sum = 0;
    for (int r : ratings) {
        if (r < 0 || r > 3) {
            throw ValidationError("rating " + std::to_string(r) + " outside 0-3");
        }
        sum += r;
    }
    const long count = static_cast<long>(ratings.size());
    // floor(sum / count + 1/2) in integers
    return static_cast<int>((2 * sum + count) / (2 * count));
}

void RelevancePool::validate() const {
    if (facet.empty() || query_id.empty()) {
        throw ValidationError("relevance pool needs facet and query_id");
    }
    std::set<std::string> seen;
    for (const auto& c : candidates) {
        if (c.relevance < 0 || c.relevance > 3) {
            throw ValidationError("pool " + query_id + ": relevance " +
                                  std::to_string(c.relevance) + " for " + c.doc_id +
                                  " outside 0-3");
        }
        if (c.doc_id == query_id) {
            throw ValidationError("pool " + query_id + " lists its own query as a candidate");
        }
        if (!seen.insert(c.doc_id).second) {
            throw ValidationError("pool " + query_id + " repeats candidate " + c.doc_id);
        }
    }
    if (annotator_labels && !annotator_labels->empty()) {
        for (const auto& c : candidates) {
            std::vector<int> ratings;
            for (const auto& labels : *annotator_labels) {
                auto it = labels.find(c.doc_id);
                if (it != labels.end()) {
                    ratings.push_back(it->second);
                }
            }
            if (ratings.empty()) {
                continue;
            }
            if (aggregate_ratings(ratings) != c.relevance) {
                throw ValidationError("pool " + query_id + ": relevance of " + c.doc_id +
                                      " disagrees with the rounded annotator mean");
            }
        }
    }
}

std::string_view to_string(UnitKind kind) {
    switch (kind) {
        case UnitKind::original: return "original";
        case UnitKind::summary: return "summary";
        case UnitKind::similar: return "similar";
        case UnitKind::dissimilar: return "dissimilar";
        case UnitKind::regenerated: return "regenerated";
    }
    return "?";
}

std::string_view to_string(Polarity polarity) {
    switch (polarity) {
        case Polarity::anchor: return "anchor";
        case Polarity::positive: return "positive";
        case Polarity::negative: return "negative";
    }
    return "?";
}

std::string_view to_string(TripletMode mode) {
    switch (mode) {
        case TripletMode::sample_one: return "sample_one";
        case TripletMode::cross_all: return "cross_all";
        case TripletMode::random_negative: return "random_negative";
        case TripletMode::hard_negative: return "hard_negative";
    }
    return "?";
}

UnitKind parse_unit_kind(std::string_view text) {
    for (auto k : {UnitKind::original, UnitKind::summary, UnitKind::similar,
                   UnitKind::dissimilar, UnitKind::regenerated}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    throw ValidationError("unknown unit kind '" + std::string(text) + "'");
}

Polarity parse_polarity(std::string_view text) {
    for (auto p : {Polarity::anchor, Polarity::positive, Polarity::negative}) {
        if (to_string(p) == text) {
            return p;
        }
    }
    throw ValidationError("unknown polarity '" + std::string(text) + "'");
}

TripletMode parse_triplet_mode(std::string_view text) {
    for (auto m : {TripletMode::sample_one, TripletMode::cross_all, TripletMode::random_negative,
                   TripletMode::hard_negative}) {
        if (to_string(m) == text) {
            return m;
        }
    }
    throw ValidationError("unknown triplet mode '" + std::string(text) + "'");
}

void to_json(json& j, const FacetSchema& v) {
    j = json{{"domain_name", v.domain_name}, {"facets", v.facets}};
}

void from_json(const json& j, FacetSchema& v) {
    v = FacetSchema::make(required<std::string>(j, "domain_name"),
                          required<std::vector<std::string>>(j, "facets"));
}

void to_json(json& j, const Document& v) {
    j = json{{"id", v.id}, {"text", v.text}};
    if (!v.facet_labels.empty()) {
        j["facet_labels"] = v.facet_labels;
    }
    if (!v.meta.empty()) {
        j["meta"] = v.meta;
    }
}

void from_json(const json& j, Document& v) {
    if (!j.is_object()) {
        throw ValidationError("document record is not a JSON object");
    }
    v.id = required<std::string>(j, "id");
    v.text = required<std::string>(j, "text");
    v.facet_labels = optional_field<std::map<std::string, std::string>>(j, "facet_labels", {});
    v.meta = optional_field<json>(j, "meta", json::object());
    if (v.id.empty()) {
        throw ValidationError("document id is empty");
    }
}

void to_json(json& j, const FacetUnit& v) {
    json provenance{{"backend_id", v.provenance.backend_id},
                    {"prompt_hash", v.provenance.prompt_hash},
                    {"mining_round", v.provenance.mining_round}};
    if (!v.provenance.conditioned_on.empty()) {
        provenance["conditioned_on"] = v.provenance.conditioned_on;
    }
    if (!v.provenance.parent_unit.empty()) {
        provenance["parent_unit"] = v.provenance.parent_unit;
    }
    j = json{{"unit_id", v.unit_id}, {"doc_id", v.doc_id},     {"facet", v.facet},
             {"kind", to_string(v.kind)}, {"text", v.text}, {"provenance", std::move(provenance)}};
    if (v.score) {
        j["score"] = *v.score;
    }
    if (!v.flags.empty()) {
        j["flags"] = v.flags;
    }
}

void from_json(const json& j, FacetUnit& v) {
    v.unit_id = required<std::string>(j, "unit_id");
    v.doc_id = required<std::string>(j, "doc_id");
    v.facet = required<std::string>(j, "facet");
    v.kind = parse_unit_kind(required<std::string>(j, "kind"));
    v.text = required<std::string>(j, "text");
    v.score.reset();
    if (auto it = j.find("score"); it != j.end() && !it->is_null()) {
        v.score = it->get<double>();
    }
    const json p = optional_field<json>(j, "provenance", json::object());
    v.provenance.backend_id = optional_field<std::string>(p, "backend_id", "");
    v.provenance.prompt_hash = optional_field<std::string>(p, "prompt_hash", "");
    v.provenance.mining_round = optional_field<int>(p, "mining_round", 0);
    v.provenance.conditioned_on = optional_field<std::string>(p, "conditioned_on", "");
    v.provenance.parent_unit = optional_field<std::string>(p, "parent_unit", "");
    v.flags = optional_field<std::vector<std::string>>(j, "flags", {});
    if (v.text.empty()) {
        throw ValidationError("unit " + v.unit_id + " has empty text");
    }
    if (v.score && (*v.score < 0.0 || *v.score > 1.0)) {
        throw ValidationError("unit " + v.unit_id + " score outside [0,1]");
    }
    if (v.provenance.mining_round < 0 ||
        (v.kind != UnitKind::regenerated && v.provenance.mining_round != 0)) {
        throw ValidationError("unit " + v.unit_id + " has an invalid mining_round");
    }
}

void to_json(json& j, const PseudoDocument& v) {
    json composition = json::array();
    for (const auto& s : v.composition) {
        composition.push_back(json{{"facet", s.facet}, {"unit_id", s.unit_id}});
    }
    j = json{{"id", v.id},
             {"doc_id", v.doc_id},
             {"composition", std::move(composition)},
             {"target_facet", v.target_facet},
             {"polarity", to_string(v.polarity)},
             {"text", v.text}};
}

void from_json(const json& j, PseudoDocument& v) {
    v.id = required<std::string>(j, "id");
    v.doc_id = optional_field<std::string>(j, "doc_id", "");
    v.composition.clear();
    for (const auto& s : required<json>(j, "composition")) {
        v.composition.push_back(
            {required<std::string>(s, "facet"), required<std::string>(s, "unit_id")});
    }
    v.target_facet = required<std::string>(j, "target_facet");
    v.polarity = parse_polarity(required<std::string>(j, "polarity"));
    v.text = required<std::string>(j, "text");
}

void to_json(json& j, const Triplet& v) {
    j = json{{"target_facet", v.target_facet}, {"query_ref", v.query_ref},
             {"positive_ref", v.positive_ref}, {"negative_ref", v.negative_ref},
             {"mode", to_string(v.mode)},      {"doc_id", v.doc_id}};
}

void from_json(const json& j, Triplet& v) {
    v.target_facet = required<std::string>(j, "target_facet");
    v.query_ref = required<std::string>(j, "query_ref");
    v.positive_ref = required<std::string>(j, "positive_ref");
    v.negative_ref = required<std::string>(j, "negative_ref");
    v.mode = parse_triplet_mode(required<std::string>(j, "mode"));
    v.doc_id = optional_field<std::string>(j, "doc_id", "");
    if (v.query_ref == v.positive_ref) {
        throw ValidationError("triplet query_ref equals positive_ref (" + v.query_ref + ")");
    }
}

void to_json(json& j, const RelevancePool& v) {
    json candidates = json::array();
    for (const auto& c : v.candidates) {
        candidates.push_back(json{{"doc_id", c.doc_id}, {"relevance", c.relevance}});
    }
    j = json{{"facet", v.facet}, {"query_id", v.query_id}, {"candidates", std::move(candidates)}};
    if (v.annotator_labels) {
        j["annotator_labels"] = *v.annotator_labels;
    }
    if (!v.meta.empty()) {
        j["meta"] = v.meta;
    }
}

void from_json(const json& j, RelevancePool& v) {
    v.facet = required<std::string>(j, "facet");
    v.query_id = required<std::string>(j, "query_id");
    v.candidates.clear();
    for (const auto& c : required<json>(j, "candidates")) {
        const auto& rel = c.at("relevance");
        if (!rel.is_number_integer()) {
            throw ValidationError("relevance must be stored as an integer");
        }
        v.candidates.push_back({required<std::string>(c, "doc_id"), rel.get<int>()});
    }
    v.annotator_labels.reset();
    if (auto it = j.find("annotator_labels"); it != j.end() && !it->is_null()) {
        v.annotator_labels = it->get<std::vector<AnnotatorLabels>>();
    }
    v.meta = optional_field<json>(j, "meta", json::object());
}

}  // namespace fable

#include "fable/recompose.hpp"

#include <set>

#include <spdlog/spdlog.h>

#include "fable/error.hpp"

namespace fable {

namespace {

char code_of(const FacetUnit& unit, bool foreign) {
    if (foreign) {
        return 'x';
    }
    switch (unit.kind) {
        case UnitKind::original:
        case UnitKind::summary: return 'a';
        case UnitKind::similar: return 's';
        case UnitKind::dissimilar: return 'd';
        case UnitKind::regenerated: return 'r';
    }
    return '?';
}

std::string_view polarity_tag(Polarity p) {
    switch (p) {
        case Polarity::anchor: return "anchor";
        case Polarity::positive: return "pos";
        case Polarity::negative: return "neg";
    }
    return "?";
}

/// Builds a pseudo-document from one unit per schema facet.
PseudoDocument compose(const UnitBundle& bundle, const FacetSchema& schema,
                       const std::string& target_facet, Polarity polarity,
                       const std::vector<const FacetUnit*>& slots, const std::string& separator,
                       const std::string& id_suffix = "") {
    PseudoDocument doc;
    doc.doc_id = bundle.doc_id;
    doc.target_facet = target_facet;
    doc.polarity = polarity;
    std::string code;
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const FacetUnit& unit = *slots[f];
        doc.composition.push_back({schema.facets[f], unit.unit_id});
        if (f) {
            doc.text += separator;
        }
        doc.text += unit.text;
        code.push_back(code_of(unit, unit.doc_id != bundle.doc_id));
    }
    doc.id = bundle.doc_id + "#" + target_facet + "#" + std::string(polarity_tag(polarity)) + "#" +
             code;
    if (bundle.variant > 0) {
        doc.id += "#v" + std::to_string(bundle.variant);
    }
    doc.id += id_suffix;
    return doc;
}

std::size_t target_index(const FacetSchema& schema, const std::string& target_facet) {
    auto t = schema.index_of(target_facet);
    if (!t) {
        throw ValidationError("target facet '" + target_facet + "' is not in schema '" +
                              schema.domain_name + "'");
    }
    return *t;
}

const FacetUnit& need(const std::vector<std::optional<FacetUnit>>& units, std::size_t f,
                      const UnitBundle& bundle, const FacetSchema& schema, std::string_view kind) {
    if (f >= units.size() || !units[f]) {
        throw ValidationError("document '" + bundle.doc_id + "' lacks a " + std::string(kind) +
                              " unit for facet '" + schema.facets[f] + "'");
    }
    return *units[f];
}

std::vector<PseudoDocument> enumerate_impl(const UnitBundle& bundle, const FacetSchema& schema,
                                           std::size_t target, const FacetUnit& target_unit,
                                           Polarity polarity, const std::string& separator,
                                           const std::string& id_suffix) {
    const std::size_t others = schema.size() - 1;
    const std::size_t count = std::size_t{1} << others;
    std::vector<PseudoDocument> out;
    out.reserve(count);
    for (std::size_t mask = 0; mask < count; ++mask) {
        std::vector<const FacetUnit*> slots(schema.size());
        std::size_t j = 0;
        for (std::size_t f = 0; f < schema.size(); ++f) {
            if (f == target) {
                slots[f] = &target_unit;
                continue;
            }
            const bool dissimilar = ((mask >> (others - 1 - j)) & 1U) != 0;
            ++j;
            slots[f] = dissimilar ? &need(bundle.dissimilar, f, bundle, schema, "dissimilar")
                                  : &need(bundle.similar, f, bundle, schema, "similar");
        }
        out.push_back(compose(bundle, schema, schema.facets[target], polarity, slots, separator,
                              id_suffix));
    }
    return out;
}

}  // namespace

void PairingConfig::validate() const {
    if (mode == TripletMode::hard_negative) {
        throw ValidationError("hard_negative is produced by mining, not a pairing mode");
    }
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
        throw ValidationError("subsample fraction must lie in (0, 1]");
    }
}

std::size_t variant_of(const FacetUnit& unit) {
    const auto pos = unit.unit_id.rfind(":v");
    if (pos == std::string::npos) {
        return 0;
    }
    const std::string digits = unit.unit_id.substr(pos + 2);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        return 0;
    }
    return static_cast<std::size_t>(std::stoul(digits));
}

std::vector<UnitBundle> bundle_units(std::span<const FacetUnit> units, const FacetSchema& schema) {
    std::vector<std::string> doc_order;
    std::map<std::string, std::vector<std::optional<FacetUnit>>> decomposition;
    std::map<std::pair<std::string, std::size_t>, UnitBundle> bundles;
    std::set<std::string> seen_ids;

    auto bundle_for = [&](const std::string& doc, std::size_t variant) -> UnitBundle& {
        auto [it, inserted] = bundles.try_emplace({doc, variant});
        if (inserted) {
            it->second.doc_id = doc;
            it->second.variant = variant;
            it->second.similar.resize(schema.size());
            it->second.dissimilar.resize(schema.size());
        }
        return it->second;
    };

    for (const auto& u : units) {
        if (!seen_ids.insert(u.unit_id).second) {
            throw ValidationError("duplicate unit id '" + u.unit_id + "'");
        }
        auto f = schema.index_of(u.facet);
        if (!f) {
            throw ValidationError("unit " + u.unit_id + " has facet '" + u.facet +
                                  "' outside the schema");
        }
        if (!decomposition.contains(u.doc_id)) {
            doc_order.push_back(u.doc_id);
            decomposition[u.doc_id].resize(schema.size());
        }
        switch (u.kind) {
            case UnitKind::original:
            case UnitKind::summary: {
                auto& slot = decomposition[u.doc_id][*f];
                if (slot) {
                    throw ValidationError("document '" + u.doc_id +
                                          "' has two decomposition units for '" + u.facet + "'");
                }
                slot = u;
                break;
            }
            case UnitKind::similar: bundle_for(u.doc_id, variant_of(u)).similar[*f] = u; break;
            case UnitKind::dissimilar:
                bundle_for(u.doc_id, variant_of(u)).dissimilar[*f] = u;
                break;
            case UnitKind::regenerated: break;
        }
    }

    std::vector<UnitBundle> out;
    for (const auto& doc : doc_order) {
        bool any = false;
        for (auto it = bundles.lower_bound({doc, 0}); it != bundles.end() && it->first.first == doc;
             ++it) {
            it->second.decomposition = decomposition[doc];
            out.push_back(std::move(it->second));
            any = true;
        }
        if (!any) {
            UnitBundle empty;
            empty.doc_id = doc;
            empty.decomposition = decomposition[doc];
            empty.similar.resize(schema.size());
            empty.dissimilar.resize(schema.size());
            out.push_back(std::move(empty));
        }
    }
    return out;
}

PseudoDocument make_anchor(const UnitBundle& bundle, const FacetSchema& schema,
                           const std::string& target_facet, const std::string& separator) {
    target_index(schema, target_facet);
    std::vector<const FacetUnit*> slots(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
        slots[f] = &need(bundle.decomposition, f, bundle, schema, "summary/original");
    }
    UnitBundle anchor_bundle{bundle.doc_id, 0, {}, {}, {}};
    return compose(anchor_bundle, schema, target_facet, Polarity::anchor, slots, separator);
}

std::vector<PseudoDocument> enumerate_compositions(const UnitBundle& bundle,
                                                   const FacetSchema& schema,
                                                   const std::string& target_facet,
                                                   Polarity polarity,
                                                   const std::string& separator) {
    if (polarity == Polarity::anchor) {
        throw ValidationError("enumerate_compositions takes positive or negative polarity");
    }
    const std::size_t t = target_index(schema, target_facet);
    // Every slot must be fillable, including the ones this polarity never selects.
    for (std::size_t f = 0; f < schema.size(); ++f) {
        need(bundle.similar, f, bundle, schema, "similar");
        need(bundle.dissimilar, f, bundle, schema, "dissimilar");
    }
    const FacetUnit& target_unit = polarity == Polarity::positive ? *bundle.similar[t]
                                                                  : *bundle.dissimilar[t];
    return enumerate_impl(bundle, schema, t, target_unit, polarity, separator, "");
}

std::vector<PseudoDocument> enumerate_with_target_unit(const UnitBundle& bundle,
                                                       const FacetSchema& schema,
                                                       const FacetUnit& target_unit,
                                                       const std::string& separator) {
    const std::size_t t = target_index(schema, target_unit.facet);
    return enumerate_impl(bundle, schema, t, target_unit, Polarity::negative, separator,
                          "#" + target_unit.unit_id);
}

std::vector<QueryPositivePair> build_query_positive_pairs(
    const PseudoDocument& anchor, std::span<const PseudoDocument> positives) {
    std::vector<const PseudoDocument*> pool{&anchor};
    for (const auto& p : positives) {
        if (p.target_facet != anchor.target_facet) {
            throw ValidationError("positive " + p.id + " targets a different facet than the anchor");
        }
        pool.push_back(&p);
    }
    if (pool.size() < 2) {
        throw ValidationError("query-positive pool needs at least 2 members");
    }
    std::vector<QueryPositivePair> pairs;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            auto key = std::minmax(pool[i]->id, pool[j]->id);
            if (pool[i]->id == pool[j]->id || !seen.insert(key).second) {
                continue;
            }
            pairs.push_back({pool[i]->id, pool[j]->id});
        }
    }
    return pairs;
}

AssembledTriplets assemble_triplets(std::span<const QueryPositivePair> pairs,
                                    std::span<const PseudoDocument> negatives, TripletMode mode,
                                    Rng& rng, const RandomNegativeSource* random_source) {
    if (negatives.empty()) {
        throw ValidationError("assemble_triplets: empty negative pool");
    }
    const std::string& target = negatives.front().target_facet;
    const std::string& doc_id = negatives.front().doc_id;
    AssembledTriplets out;
    auto emit = [&](const QueryPositivePair& pair, const std::string& negative_ref) {
        out.triplets.push_back(
            Triplet{target, pair.query_ref, pair.positive_ref, negative_ref, mode, doc_id});
    };
    switch (mode) {
        case TripletMode::cross_all:
        case TripletMode::hard_negative:
            for (const auto& pair : pairs) {
                for (const auto& neg : negatives) {
                    emit(pair, neg.id);
                }
            }
            break;
        case TripletMode::sample_one:
            for (const auto& pair : pairs) {
                emit(pair, negatives[rng.uniform_index(negatives.size())].id);
            }
            break;
        case TripletMode::random_negative: {
            if (random_source == nullptr || random_source->foreign_units.empty()) {
                throw ValidationError(
                    "random_negative mode needs units from at least one other document");
            }
            const auto& src = *random_source;
            const std::size_t t = target_index(src.schema, target);
            for (const auto& pair : pairs) {
                const PseudoDocument& base = negatives[rng.uniform_index(negatives.size())];
                const FacetUnit& foreign =
                    src.foreign_units[rng.uniform_index(src.foreign_units.size())];
                if (foreign.doc_id == src.bundle.doc_id || foreign.facet != target) {
                    throw ValidationError("random negative source unit " + foreign.unit_id +
                                          " is not a foreign unit for facet '" + target + "'");
                }
                std::vector<const FacetUnit*> slots(src.schema.size());
                for (std::size_t f = 0; f < src.schema.size(); ++f) {
                    if (f == t) {
                        slots[f] = &foreign;
                        continue;
                    }
                    const auto& id = base.composition[f].unit_id;
                    const auto& sim = need(src.bundle.similar, f, src.bundle, src.schema, "similar");
                    slots[f] = sim.unit_id == id
                                   ? &sim
                                   : &need(src.bundle.dissimilar, f, src.bundle, src.schema,
                                           "dissimilar");
                }
                auto neg = compose(src.bundle, src.schema, target, Polarity::negative, slots,
                                   src.separator, "#" + foreign.unit_id);
                emit(pair, neg.id);
                out.extra_negatives.push_back(std::move(neg));
            }
            break;
        }
    }
    return out;
}

RecomposeResult recompose_corpus(std::span<const FacetUnit> units, const FacetSchema& schema,
                                 const RecomposeOptions& options) {
    options.pairing.validate();
    auto bundles = bundle_units(units, schema);

    std::vector<std::string> doc_ids;
    for (const auto& b : bundles) {
        if (doc_ids.empty() || doc_ids.back() != b.doc_id) {
            doc_ids.push_back(b.doc_id);
        }
    }
    RecomposeResult result;
    auto selected = subsample_documents(doc_ids, options.pairing.subsample_fraction,
                                        options.pairing.seed);
    if (selected.warning) {
        spdlog::warn("recompose: {}", *selected.warning);
        result.warnings.push_back(*selected.warning);
    }
    const std::set<std::string> keep(selected.items.begin(), selected.items.end());
    result.documents_used = keep.size();

    // Foreign pools per facet: decomposition units of the selected documents.
    std::vector<std::vector<FacetUnit>> by_facet(schema.size());
    if (options.pairing.mode == TripletMode::random_negative) {
        for (const auto& b : bundles) {
            if (b.variant != 0 || !keep.contains(b.doc_id)) {
                continue;
            }
            for (std::size_t f = 0; f < schema.size(); ++f) {
                if (b.decomposition[f]) {
                    by_facet[f].push_back(*b.decomposition[f]);
                }
            }
        }
    }

    std::vector<PseudoDocument> pseudo;
    std::string current_doc;
    std::vector<Triplet> doc_triplets;
    auto flush_doc = [&] {
        if (options.per_doc_cap && doc_triplets.size() > *options.per_doc_cap) {
            Rng cap_rng(derive_seed(options.pairing.seed, "cap/" + current_doc));
            std::vector<Triplet> capped;
            for (auto i : cap_rng.sample_indices(doc_triplets.size(), *options.per_doc_cap)) {
                capped.push_back(std::move(doc_triplets[i]));
            }
            doc_triplets = std::move(capped);
        }
        for (auto& t : doc_triplets) {
            ++result.triplets_per_facet[t.target_facet];
            result.triplets.push_back(std::move(t));
        }
        doc_triplets.clear();
    };

    for (const auto& bundle : bundles) {
        if (!keep.contains(bundle.doc_id)) {
            continue;
        }
        if (bundle.doc_id != current_doc) {
            flush_doc();
            current_doc = bundle.doc_id;
        }
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const std::string& facet = schema.facets[f];
            auto anchor = make_anchor(bundle, schema, facet, options.separator);
            auto positives =
                enumerate_compositions(bundle, schema, facet, Polarity::positive, options.separator);
            auto negatives =
                enumerate_compositions(bundle, schema, facet, Polarity::negative, options.separator);
            if (bundle.dissimilar[f]->has_flag("dropped")) {
                std::string note = "recompose: negative " + bundle.dissimilar[f]->unit_id +
                                   " is dropped; no triplets for (" + bundle.doc_id + ", " +
                                   facet + ")";
                spdlog::warn("{}", note);
                result.warnings.push_back(std::move(note));
                continue;
            }
            auto pairs = build_query_positive_pairs(anchor, positives);
            Rng rng(derive_seed(options.pairing.seed, "pairing/" + bundle.doc_id + "/" + facet +
                                                          "/v" + std::to_string(bundle.variant)));
            std::vector<FacetUnit> foreign;
            for (const auto& u : by_facet[f]) {
                if (u.doc_id != bundle.doc_id) {
                    foreign.push_back(u);
                }
            }
            RandomNegativeSource source{bundle, schema, foreign, options.separator};
            auto assembled =
                assemble_triplets(pairs, negatives, options.pairing.mode, rng, &source);

            pseudo.push_back(std::move(anchor));
            for (auto& p : positives) pseudo.push_back(std::move(p));
            for (auto& n : negatives) pseudo.push_back(std::move(n));
            for (auto& n : assembled.extra_negatives) pseudo.push_back(std::move(n));
            for (auto& t : assembled.triplets) doc_triplets.push_back(std::move(t));
        }
    }
    flush_doc();
    result.pseudo_documents = referenced_pseudo_documents(pseudo, result.triplets);
    return result;
}

std::vector<PseudoDocument> referenced_pseudo_documents(std::span<const PseudoDocument> docs,
                                                        std::span<const Triplet> triplets) {
    std::set<std::string> referenced;
    for (const auto& t : triplets) {
        referenced.insert(t.query_ref);
        referenced.insert(t.positive_ref);
        referenced.insert(t.negative_ref);
    }
    std::set<std::string> emitted;
    std::vector<PseudoDocument> out;
    for (const auto& d : docs) {
        if (referenced.contains(d.id) && emitted.insert(d.id).second) {
            out.push_back(d);
        }
    }
    return out;
}

}  // namespace fable

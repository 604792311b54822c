#include "fable/mine.hpp"

#include <map>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "fable/error.hpp"
#include "fable/parallel.hpp"
#include "fable/recompose.hpp"

namespace fable {

namespace {

// Holds copies: callers append to the vector the index was built from.
using DecompositionIndex = std::map<std::pair<std::string, std::string>, FacetUnit>;

DecompositionIndex index_decomposition(std::span<const FacetUnit> units) {
    DecompositionIndex index;
    for (const auto& u : units) {
        if (u.is_decomposition()) {
            index[{u.doc_id, u.facet}] = u;
        }
    }
    return index;
}

const FacetUnit& counterpart(const DecompositionIndex& index, const FacetUnit& unit) {
    auto it = index.find({unit.doc_id, unit.facet});
    if (it == index.end()) {
        throw ValidationError("unit " + unit.unit_id +
                              " has no summary/original counterpart for facet '" + unit.facet +
                              "'");
    }
    return it->second;
}

double mean(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

void add_flag(FacetUnit& unit, const std::string& flag) {
    if (!unit.has_flag(flag)) {
        unit.flags.push_back(flag);
    }
}

}  // namespace

OverCeilingPolicy parse_over_ceiling_policy(std::string_view text) {
    if (text == "keep_warn") return OverCeilingPolicy::keep_warn;
    if (text == "drop") return OverCeilingPolicy::drop;
    throw ValidationError("unknown over-ceiling policy '" + std::string(text) +
                          "' (keep_warn, drop)");
}

std::string_view to_string(OverCeilingPolicy policy) {
    return policy == OverCeilingPolicy::drop ? "drop" : "keep_warn";
}

void MiningConfig::validate() const {
    if (!(easy_threshold >= 0.0 && easy_threshold < hard_ceiling && hard_ceiling <= 1.0)) {
        throw ValidationError("mining thresholds need 0 <= easy < ceiling <= 1");
    }
    target_band.validate();
    if (target_band.low < easy_threshold || target_band.high > hard_ceiling) {
        throw ValidationError("target band must lie within [easy threshold, hard ceiling]");
    }
    if (max_rounds < 1) {
        throw ValidationError("max_rounds must be >= 1");
    }
}

std::vector<FacetUnit> score_negatives(std::span<const FacetUnit> units, Scorer& scorer,
                                       std::size_t concurrency) {
    const auto index = index_decomposition(units);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (units[i].is_negative()) {
            counterpart(index, units[i]);
            if (!units[i].score) {
                todo.push_back(i);
            }
        }
    }
    auto scores = parallel_map(todo.size(), concurrency, [&](std::size_t k) {
        const FacetUnit& unit = units[todo[k]];
        return scorer.score(counterpart(index, unit).text, unit.text);
    });
    std::vector<FacetUnit> out(units.begin(), units.end());
    for (std::size_t k = 0; k < todo.size(); ++k) {
        out[todo[k]].score = scores[k];
    }
    return out;
}

Classification classify(std::span<const FacetUnit> units, const MiningConfig& config) {
    Classification out;
    for (const auto& u : units) {
        if (!u.score) {
            throw ValidationError("unit " + u.unit_id + " is unscored");
        }
        const double s = *u.score;
        if (s < config.easy_threshold) {
            out.easy.push_back(u);
        } else if (s < config.hard_ceiling) {
            out.retained.push_back(u);
        } else {
            out.over_ceiling.push_back(u);
        }
    }
    return out;
}

Histogram make_histogram(std::span<const double> scores, std::size_t bins) {
    Histogram h;
    h.bin_width = 1.0 / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double s : scores) {
        auto bin = static_cast<std::size_t>(s * static_cast<double>(bins));
        h.counts[std::min(bin, bins - 1)]++;
    }
    return h;
}

nlohmann::json to_json_value(const ScoreShiftReport& r) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& s : r.rounds) {
        rounds.push_back({{"round", s.round},
                          {"regenerated", s.regenerated},
                          {"accepted", s.accepted},
                          {"rejected", s.rejected},
                          {"carried", s.carried},
                          {"mean_score", s.mean_score}});
    }
    return {
        {"config",
         {{"easy_threshold", r.config.easy_threshold},
          {"hard_ceiling", r.config.hard_ceiling},
          {"target_band", {r.config.target_band.low, r.config.target_band.high}},
          {"max_rounds", r.config.max_rounds},
          {"over_ceiling_policy", to_string(r.config.over_ceiling_policy)}}},
        {"counts",
         {{"scored", r.scored},
          {"easy", r.easy},
          {"retained", r.retained},
          {"over_ceiling", r.over_ceiling},
          {"dropped", r.dropped},
          {"regenerations", r.regenerations},
          {"accepted", r.accepted},
          {"rejected", r.rejected},
          {"still_easy", r.still_easy},
          {"failures", r.failures},
          {"supplemental_triplets", r.supplemental_triplets}}},
        {"mean_before_all", r.mean_before_all},
        {"mean_before_easy", r.mean_before_easy},
        {"mean_after_regenerated", r.mean_after_regenerated},
        {"histogram_before", {{"bin_width", r.before.bin_width}, {"counts", r.before.counts}}},
        {"histogram_after", {{"bin_width", r.after.bin_width}, {"counts", r.after.counts}}},
        {"rounds", std::move(rounds)},
    };
}

MiningResult mine_hard_negatives(std::span<const Document> docs, std::span<const FacetUnit> units,
                                 const FacetSchema& schema, const PromptSet& prompts,
                                 Generator& generator, Scorer& scorer, const MiningConfig& config,
                                 const MiningOptions& options) {
    config.validate();
    std::map<std::string, const Document*> doc_by_id;
    for (const auto& d : docs) {
        doc_by_id[d.id] = &d;
    }

    MiningResult result;
    result.units = score_negatives(units, scorer, options.concurrency);
    const auto index = index_decomposition(result.units);
    ScoreShiftReport& report = result.report;
    report.config = config;

    // Initial negatives only; regenerated units from an earlier run are left alone.
    std::vector<std::size_t> negatives;
    std::vector<double> before_scores;
    for (std::size_t i = 0; i < result.units.size(); ++i) {
        if (result.units[i].kind == UnitKind::dissimilar) {
            negatives.push_back(i);
            before_scores.push_back(*result.units[i].score);
        }
    }
    report.scored = negatives.size();
    report.before = make_histogram(before_scores);
    report.mean_before_all = mean(before_scores);

    std::vector<FacetUnit> work;
    std::vector<double> easy_scores;
    for (auto i : negatives) {
        FacetUnit& u = result.units[i];
        const double s = *u.score;
        if (s < config.easy_threshold) {
            ++report.easy;
            easy_scores.push_back(s);
            work.push_back(u);
        } else if (s < config.hard_ceiling) {
            ++report.retained;
        } else {
            ++report.over_ceiling;
            if (config.over_ceiling_policy == OverCeilingPolicy::drop) {
                add_flag(u, "dropped");
                ++report.dropped;
            } else {
                add_flag(u, "over_ceiling");
                spdlog::warn("mine: negative {} scores {:.3f} >= {:.2f}; kept", u.unit_id, s,
                             config.hard_ceiling);
            }
        }
    }
    report.mean_before_easy = mean(easy_scores);

    std::vector<double> after_scores;
    for (int round = 1; round <= config.max_rounds && !work.empty(); ++round) {
        auto outcomes = parallel_try_map(work.size(), options.concurrency, [&](std::size_t k) {
            const FacetUnit& prior = work[k];
            auto doc = doc_by_id.find(prior.doc_id);
            if (doc == doc_by_id.end()) {
                throw ValidationError("unit " + prior.unit_id + " references unknown document '" +
                                      prior.doc_id + "'");
            }
            const FacetUnit& decomp = counterpart(index, prior);
            SynthesizeOptions synth = options.synthesis;
            FacetUnit regen = regenerate_negative(*doc->second, decomp, prior, *prior.score,
                                                  config.target_band, prompts, generator, synth);
            regen.score = scorer.score(decomp.text, regen.text);
            return regen;
        });

        RoundStats stats;
        stats.round = round;
        std::vector<double> round_scores;
        std::vector<FacetUnit> next;
        for (std::size_t k = 0; k < outcomes.size(); ++k) {
            auto& o = outcomes[k];
            if (o.error) {
                StageFailure failure{work[k].doc_id,
                                     work[k].unit_id + ": " + describe_exception(o.error),
                                     is_backend_error(o.error)};
                spdlog::warn("mine: regeneration of {} failed: {}", work[k].unit_id,
                             failure.message);
                result.failures.push_back(std::move(failure));
                ++report.failures;
                continue;
            }
            FacetUnit regen = std::move(*o.value);
            ++stats.regenerated;
            ++report.regenerations;
            const double s = *regen.score;
            round_scores.push_back(s);
            if (s >= config.hard_ceiling) {
                add_flag(regen, "rejected");
                ++stats.rejected;
                ++report.rejected;
                after_scores.push_back(s);
            } else if (s < config.easy_threshold && round < config.max_rounds) {
                add_flag(regen, "carried");
                ++stats.carried;
                next.push_back(regen);
            } else {
                if (s < config.easy_threshold) {
                    add_flag(regen, "still_easy");
                    ++report.still_easy;
                }
                add_flag(regen, "hard_negative");
                ++stats.accepted;
                ++report.accepted;
                after_scores.push_back(s);
                result.accepted.push_back(regen);
            }
            result.units.push_back(std::move(regen));
        }
        stats.mean_score = mean(round_scores);
        report.rounds.push_back(stats);
        work = std::move(next);
    }
    report.after = make_histogram(after_scores);
    report.mean_after_regenerated = mean(after_scores);

    // Supplemental triplets: each accepted unit takes the target slot of the
    // negative compositions of its own document and variant.
    std::map<std::string, std::string> parent;
    std::map<std::string, UnitKind> kind_of;
    for (const auto& u : result.units) {
        parent[u.unit_id] = u.provenance.parent_unit;
        kind_of[u.unit_id] = u.kind;
    }
    auto bundles = bundle_units(result.units, schema);
    std::map<std::string, const UnitBundle*> bundle_by_root;
    for (const auto& b : bundles) {
        for (const auto& d : b.dissimilar) {
            if (d) {
                bundle_by_root[d->unit_id] = &b;
            }
        }
    }
    std::vector<PseudoDocument> pseudo;
    for (const auto& unit : result.accepted) {
        std::string root = unit.unit_id;
        while (kind_of[root] == UnitKind::regenerated && !parent[root].empty()) {
            root = parent[root];
        }
        auto b = bundle_by_root.find(root);
        if (b == bundle_by_root.end()) {
            throw ValidationError("regenerated unit " + unit.unit_id +
                                  " does not descend from a known dissimilar unit");
        }
        const UnitBundle& bundle = *b->second;
        auto anchor = make_anchor(bundle, schema, unit.facet, options.separator);
        auto positives = enumerate_compositions(bundle, schema, unit.facet, Polarity::positive,
                                                options.separator);
        auto negatives = enumerate_with_target_unit(bundle, schema, unit, options.separator);
        auto pairs = build_query_positive_pairs(anchor, positives);
        Rng rng(derive_seed(options.seed, "hard-negative/" + unit.unit_id));
        const TripletMode mode = options.pairing == TripletMode::sample_one
                                     ? TripletMode::sample_one
                                     : TripletMode::hard_negative;
        auto assembled = assemble_triplets(pairs, negatives, mode, rng);
        for (auto& t : assembled.triplets) {
            t.mode = TripletMode::hard_negative;
            result.triplets.push_back(std::move(t));
        }
        pseudo.push_back(std::move(anchor));
        for (auto& p : positives) pseudo.push_back(std::move(p));
        for (auto& n : negatives) pseudo.push_back(std::move(n));
    }
    result.pseudo_documents = referenced_pseudo_documents(pseudo, result.triplets);
    report.supplemental_triplets = result.triplets.size();
    return result;
}

FacetKindMeans facet_document_similarity(std::span<const FacetUnit> units,
                                         std::span<const Document> docs,
                                         const FacetSchema& schema, Scorer& scorer,
                                         std::size_t concurrency) {
    std::map<std::string, const Document*> doc_by_id;
    for (const auto& d : docs) {
        doc_by_id[d.id] = &d;
    }
    std::vector<const FacetUnit*> selected;
    for (const auto& u : units) {
        if (u.kind == UnitKind::summary || u.kind == UnitKind::original ||
            u.kind == UnitKind::similar) {
            if (!doc_by_id.contains(u.doc_id)) {
                throw ValidationError("unit " + u.unit_id + " references unknown document '" +
                                      u.doc_id + "'");
            }
            selected.push_back(&u);
        }
    }
    auto scores = parallel_map(selected.size(), concurrency, [&](std::size_t i) {
        return scorer.score(doc_by_id.at(selected[i]->doc_id)->text, selected[i]->text);
    });
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        auto& cell = sums[selected[i]->facet][std::string(to_string(selected[i]->kind))];
        cell.first += scores[i];
        cell.second += 1;
    }
    FacetKindMeans out;
    for (const auto& facet : schema.facets) {
        auto it = sums.find(facet);
        if (it == sums.end()) {
            throw ValidationError("no summary/original/similar units for facet '" + facet + "'");
        }
        for (const auto& [kind, cell] : it->second) {
            out[facet][kind] = cell.first / static_cast<double>(cell.second);
        }
    }
    return out;
}

}  // namespace fable

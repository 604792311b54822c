// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Runs with mock backends only.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "fable/benchbuild.hpp"
#include "fable/corpus.hpp"
#include "fable/evaluate.hpp"
#include "fable/metrics.hpp"
#include "fable/mine.hpp"
#include "fable/pipeline.hpp"
#include "fable/recompose.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fable;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<FacetUnit> synthesized(const std::vector<Document>& docs, const FacetSchema& schema) {
    MockGenerator gen;
    const auto prompts = PromptSet::defaults();
    auto dec = decompose_corpus(docs, schema, prompts, gen, {});
    return synthesize_corpus(docs, dec.units, schema, prompts, gen, {}).units;
}

// 1. Four positives, four negatives, ten pairs, forty triplets per (doc, facet).
Outcome recomposition_counts() {
    Outcome o;
    const auto schema = builtin_schema("abstract");
    const auto units = synthesized(fixtures::abstracts(1), schema);
    const auto start = Clock::now();
    auto bundles = bundle_units(units, schema);
    o.require(bundles.size() == 1, "expected one bundle");
    for (const auto& facet : schema.facets) {
        auto pos = enumerate_compositions(bundles[0], schema, facet, Polarity::positive);
        auto neg = enumerate_compositions(bundles[0], schema, facet, Polarity::negative);
        auto pairs = build_query_positive_pairs(make_anchor(bundles[0], schema, facet), pos);
        o.require(pos.size() == 4, fmt::format("{}: {} positives", facet, pos.size()));
        o.require(neg.size() == 4, fmt::format("{}: {} negatives", facet, neg.size()));
        o.require(pairs.size() == 10, fmt::format("{}: {} pairs", facet, pairs.size()));
    }
    RecomposeOptions opts;
    opts.pairing.mode = TripletMode::cross_all;
    auto result = recompose_corpus(units, schema, opts);
    for (const auto& facet : schema.facets) {
        const auto n = result.triplets_per_facet[facet];
        o.require(n == 40, fmt::format("{}: {} triplets", facet, n));
    }
    const double t = seconds_since(start);
    o.require(t < 1.0, fmt::format("took {:.3f} s", t));
    if (o.pass) o.detail = fmt::format("4/4/10/40 per facet, {:.4f} s", t);
    return o;
}

// 2. NDCG@K and AP against the brute-force reference.
Outcome metric_oracle() {
    Outcome o;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> rel(0, 3);
    std::uniform_int_distribution<std::size_t> len(1, 20);
    double worst = 0.0;
    for (int p = 0; p < 100; ++p) {
        std::vector<int> rels(len(rng));
        for (auto& r : rels) r = rel(rng);
        for (std::size_t k = 1; k <= rels.size(); ++k) {
            worst = std::max(worst, std::abs(ndcg_at(rels, k) - oracle::ndcg(rels, k)));
            worst = std::max(worst, std::abs(ndcg_at(rels, k, Gain::exponential) -
                                             oracle::ndcg(rels, k, true)));
        }
        worst = std::max(worst,
                         std::abs(average_precision(rels) - oracle::average_precision(rels)));
    }
    o.require(worst <= 1e-9, fmt::format("max |diff| {:.3e}", worst));
    if (o.pass) o.detail = fmt::format("100 pools, max |diff| {:.3e} <= 1e-9", worst);
    return o;
}

// 3. Ideal ranking is 1; demoting swaps inside the cutoff never raise NDCG.
Outcome ndcg_properties() {
    Outcome o;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> rel(0, 3);
    std::uniform_int_distribution<std::size_t> len(2, 30);
    std::size_t swaps = 0;
    for (int p = 0; p < 1000; ++p) {
        std::vector<int> rels(len(rng));
        for (auto& r : rels) r = rel(rng);
        if (std::none_of(rels.begin(), rels.end(), [](int r) { return r > 0; })) {
            rels[0] = 1 + p % 3;
        }
        std::shuffle(rels.begin(), rels.end(), rng);
        auto ideal = rels;
        std::sort(ideal.rbegin(), ideal.rend());
        for (std::size_t k = 1; k <= rels.size(); ++k) {
            o.require(ndcg_at(ideal, k) == 1.0, fmt::format("pool {} ideal@{} != 1", p, k));
            const double base = ndcg_at(rels, k);
            for (std::size_t i = 0; i + 1 < k; ++i) {
                if (rels[i] <= rels[i + 1]) continue;
                auto swapped = rels;
                std::swap(swapped[i], swapped[i + 1]);
                ++swaps;
                o.require(ndcg_at(swapped, k) <= base,
                          fmt::format("pool {} swap at {} raised NDCG@{}", p, i, k));
            }
        }
    }
    if (o.pass) o.detail = fmt::format("1000 pools, {} demoting swaps checked", swaps);
    return o;
}

// 4. K rule.
Outcome k_rule() {
    Outcome o;
    o.require(cutoff_k(0.20, 50) == 10, "50 at 20%");
    o.require(cutoff_k(0.10, 23) == 2, "23 at 10%");
    o.require(cutoff_k(0.10, 3) == 1, "3 at 10%");
    if (o.pass) o.detail = "K(50,20%)=10 K(23,10%)=2 K(3,10%)=1";
    return o;
}

// 5. Mining loop on the scripted twenty-negative fixture.
Outcome mining_contract() {
    Outcome o;
    auto f = fixtures::mining_fixture();
    o.require(f.negative_texts.size() == 20, "fixture does not hold 20 negatives");
    if (!o.pass) return o;
    fixtures::ChainGenerator gen;
    ScriptedScorer scorer;
    fixtures::script_scores(scorer, f);
    MiningConfig config;
    config.max_rounds = 2;
    auto result = mine_hard_negatives(f.docs, f.units, f.schema, PromptSet::defaults(), gen,
                                      scorer, config, MiningOptions{});

    // Round 1: every initially easy negative once, nothing else.
    std::multiset<std::string> priors;
    for (const auto& p : gen.regenerated_priors()) priors.insert(p);
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t expected = f.initial[i] < 0.25 ? 1 : 0;
        o.require(priors.count(f.negative_texts[i]) == expected,
                  fmt::format("negative {} regenerated {} times in round 1", i,
                              priors.count(f.negative_texts[i])));
    }
    // Round 2: exactly the round-1 outputs that still scored below 0.25.
    std::size_t carried = 0;
    for (const auto& [i, s] : f.round1) {
        const std::size_t expected = s < 0.25 ? 1 : 0;
        carried += expected;
        o.require(priors.count("R(" + f.negative_texts[i] + ")") == expected,
                  fmt::format("negative {} round-2 regeneration count", i));
    }
    o.require(priors.size() == f.round1.size() + carried, "unexpected regeneration requests");

    for (const auto& u : result.accepted) {
        o.require(u.score && *u.score < 0.5, u.unit_id + " accepted at or above 0.5");
    }
    o.require(result.accepted.size() == 6, fmt::format("{} accepted", result.accepted.size()));

    std::set<std::string> regenerated;
    for (const auto& u : result.units) {
        if (u.kind == UnitKind::regenerated) regenerated.insert(u.unit_id);
    }
    std::map<std::string, const PseudoDocument*> by_id;
    for (const auto& p : result.pseudo_documents) by_id[p.id] = &p;
    o.require(!result.triplets.empty(), "no supplemental triplets");
    for (const auto& t : result.triplets) {
        o.require(t.mode == TripletMode::hard_negative, "triplet mode is not hard_negative");
        for (const auto* ref : {&t.query_ref, &t.positive_ref}) {
            auto it = by_id.find(*ref);
            o.require(it != by_id.end(), "missing pseudo-document " + *ref);
            if (it == by_id.end()) continue;
            for (const auto& s : it->second->composition) {
                o.require(!regenerated.count(s.unit_id), "regenerated unit outside negative slot");
            }
        }
        auto neg = by_id.find(t.negative_ref);
        o.require(neg != by_id.end(), "missing negative " + t.negative_ref);
        if (neg == by_id.end()) continue;
        bool target_regenerated = false;
        for (const auto& s : neg->second->composition) {
            if (s.facet == t.target_facet) {
                target_regenerated = regenerated.count(s.unit_id) > 0;
            } else {
                o.require(!regenerated.count(s.unit_id), "regenerated unit in a non-target slot");
            }
        }
        o.require(target_regenerated, "negative target slot is not a regenerated unit");
    }
    if (o.pass) {
        o.detail = fmt::format("{} regenerations over 2 rounds, {} accepted, {} triplets",
                               priors.size(), result.accepted.size(), result.triplets.size());
    }
    return o;
}

// 6. Byte-identical reruns; ten documents in under ten seconds.
Outcome determinism() {
    Outcome o;
    testutil::TempDir dir("accept");
    write_jsonl(dir / "docs.jsonl", fixtures::abstracts(10));
    PipelineConfig cfg;
    cfg.docs = dir / "docs.jsonl";
    cfg.seed = 42;
    cfg.mine = true;
    const auto start = Clock::now();
    run_pipeline(cfg, make_mock_backends(cfg.seed), dir / "run1");
    const double t = seconds_since(start);
    run_pipeline(cfg, make_mock_backends(cfg.seed), dir / "run2");
    for (const char* name : {"triplets.jsonl", "manifest.json", "triplets_hn.jsonl"}) {
        const auto a = slurp(dir / "run1" / name);
        o.require(!a.empty(), std::string(name) + " is empty");
        o.require(a == slurp(dir / "run2" / name), std::string(name) + " differs between runs");
    }
    o.require(t < 10.0, fmt::format("10-document run took {:.2f} s", t));
    if (o.pass) o.detail = fmt::format("identical triplets and manifest, 10 docs in {:.3f} s", t);
    return o;
}

// 7. Random negatives hold a foreign summary unit at the target facet.
Outcome random_negatives() {
    Outcome o;
    const auto schema = builtin_schema("abstract");
    const auto units = synthesized(fixtures::abstracts(6), schema);
    std::map<std::string, const FacetUnit*> unit_by_id;
    for (const auto& u : units) unit_by_id[u.unit_id] = &u;
    RecomposeOptions opts;
    opts.pairing.mode = TripletMode::random_negative;
    opts.pairing.seed = 7;
    auto result = recompose_corpus(units, schema, opts);
    std::map<std::string, const PseudoDocument*> by_id;
    for (const auto& p : result.pseudo_documents) by_id[p.id] = &p;
    std::size_t foreign = 0;
    for (const auto& t : result.triplets) {
        auto neg = by_id.find(t.negative_ref);
        if (neg == by_id.end()) continue;
        const auto& slot = neg->second->slot(t.target_facet);
        auto u = unit_by_id.find(slot.unit_id);
        if (u != unit_by_id.end() && u->second->kind == UnitKind::summary &&
            u->second->facet == t.target_facet && u->second->doc_id != t.doc_id) {
            ++foreign;
        }
    }
    o.require(!result.triplets.empty(), "no triplets");
    o.require(foreign == result.triplets.size(),
              fmt::format("{} of {} negatives foreign", foreign, result.triplets.size()));
    if (o.pass) o.detail = fmt::format("{}/{} negatives foreign (100%)", foreign, foreign);
    return o;
}

// 8. Agreement statistics against closed-form values.
Outcome agreement_fixtures() {
    Outcome o;
    struct Case {
        std::vector<int> a, b;
        double tau, rho, r;
    };
    const std::vector<Case> cases{
        {{0, 1, 2, 3}, {0, 2, 1, 3}, 2.0 / 3.0, 0.8, 0.8},
        {{0, 1, 2, 3}, {0, 1, 2, 3}, 1.0, 1.0, 1.0},
        {{0, 1, 2, 3}, {3, 2, 1, 0}, -1.0, -1.0, -1.0},
        {{0, 0, 1, 2}, {0, 1, 1, 2}, 0.8, 5.0 / 6.0, 2.0 / std::sqrt(5.5)},
        {{1, 1, 2, 3, 3}, {2, 1, 1, 3, 2}, 0.5, 7.0 / 12.0, 2.0 / std::sqrt(11.2)},
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto g = agreement(c.a, c.b);
        const double d = std::max({std::abs(g.kendall_tau_b - c.tau),
                                   std::abs(g.spearman_rho - c.rho), std::abs(g.pearson_r - c.r)});
        worst = std::max(worst, d);
        o.require(d <= 1e-12, fmt::format("fixture {} off by {:.3e}", i + 1, d));
    }
    if (o.pass) o.detail = fmt::format("5 fixtures, max |diff| {:.3e} <= 1e-12", worst);
    return o;
}

// 9. Random embeddings land inside the permutation band.
Outcome random_baseline() {
    Outcome o;
    constexpr std::uint64_t kSeed = 22;
    struct Shape {
        const char* facet;
        std::size_t candidates;
    };
    // Eight queries per facet; candidate counts of the three benchmark facets.
    const Shape shapes[] = {{"story", 23}, {"question", 80}, {"options", 70}};
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> rel(0, 3);
    std::vector<RelevancePool> pools;
    for (const auto& s : shapes) {
        for (int qi = 0; qi < 8; ++qi) {
            RelevancePool p;
            p.facet = s.facet;
            p.query_id = fmt::format("{}-q{}", s.facet, qi);
            for (std::size_t c = 0; c < s.candidates; ++c) {
                p.candidates.push_back({fmt::format("{}-c{:03}", s.facet, c), rel(rng)});
            }
            pools.push_back(std::move(p));
        }
    }
    RandomEmbedder embedder(64, kSeed);
    EmbeddingTable table;
    for (const auto& p : pools) {
        table[p.query_id] = embedder.embed(p.query_id);
        for (const auto& c : p.candidates) {
            if (!table.contains(c.doc_id)) table[c.doc_id] = embedder.embed(c.doc_id);
        }
    }
    EvalConfig config;
    config.ndcg_percents = {0.20};
    const auto report = evaluate_run(pools, table, config);
    const double observed = report.aggregated.ndcg[0];

    std::vector<std::vector<int>> rels;
    std::vector<std::size_t> cutoffs;
    for (const auto& p : pools) {
        std::vector<int> r;
        for (const auto& c : p.candidates) r.push_back(c.relevance);
        cutoffs.push_back(oracle::cutoff(20, r.size()));
        rels.push_back(std::move(r));
    }
    const auto means = oracle::permutation_mean_ndcg(rels, cutoffs, 10000, kSeed);
    const double lo = oracle::percentile(means, 1.0);
    const double hi = oracle::percentile(means, 99.0);
    o.require(observed >= lo && observed <= hi,
              fmt::format("NDCG_%20 {:.4f} outside [{:.4f}, {:.4f}]", observed, lo, hi));
    if (o.pass) {
        o.detail = fmt::format("NDCG_%20 {:.4f} in [{:.4f}, {:.4f}] over {} pools", observed, lo,
                               hi, pools.size());
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"recomposition count law", recomposition_counts},
        {"metric oracle equivalence", metric_oracle},
        {"ndcg properties", ndcg_properties},
        {"k rule", k_rule},
        {"mining loop contract", mining_contract},
        {"end-to-end determinism", determinism},
        {"random-negative ablation", random_negatives},
        {"agreement statistics", agreement_fixtures},
        {"random-baseline sanity", random_baseline},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

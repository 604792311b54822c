#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "fable/benchbuild.hpp"
#include "fable/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fable;

namespace {

std::vector<BenchItem> typed_items(std::size_t n) {
    std::vector<BenchItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "i%02zu", i);
        items.push_back({id, i % 2 == 0 ? "conversation" : "lecture", std::string("text ") + id});
    }
    return items;
}

double plain_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - sa / n) * (b[i] - sb / n);
        va += (a[i] - sa / n) * (a[i] - sa / n);
        vb += (b[i] - sb / n) * (b[i] - sb / n);
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("facet_items sorts, deduplicates and reads the type") {
    std::vector<Document> docs{fixtures::toefl_item("b", "lecture"),
                               fixtures::toefl_item("a", "conversation")};
    auto dup = fixtures::toefl_item("c", "lecture");
    dup.facet_labels["story"] = docs[0].facet_labels["story"];
    docs.push_back(dup);
    auto items = facet_items(docs, "story");
    REQUIRE(items.size() == 2);
    CHECK(items[0].id == "a");
    CHECK(items[0].type == "conversation");
    CHECK(items[1].id == "b");
    CHECK(facet_items(docs, "question").size() == 3);
    CHECK_THROWS_AS(facet_items(docs, "plot"), ValidationError);
}

TEST_CASE("dispersion is the population deviation over other items") {
    ScoreMatrix m{{0, 0.2, 0.4, 0.6}, {0.5, 0, 0.5, 0.5}, {0, 1, 0, 0}, {0.1, 0.1, 0.1, 0}};
    auto d = score_dispersion(m);
    REQUIRE(d.size() == 4);
    CHECK(d[0] == doctest::Approx(std::sqrt(((0.2 * 0.2) * 2) / 3.0)));
    CHECK(d[1] == doctest::Approx(0.0));
    CHECK(d[2] == doctest::Approx(std::sqrt((1.0 / 9 * 2 + 4.0 / 9) / 3.0)));
    CHECK(d[3] == doctest::Approx(0.0));
    CHECK(score_dispersion(ScoreMatrix{{0}}) == std::vector<double>{0.0});
}

TEST_CASE("scripted scorer: widest spread is selected first") {
    std::vector<BenchItem> items{{"a", "t", "A"}, {"b", "t", "B"}, {"c", "t", "C"}, {"d", "t", "D"}};
    ScriptedScorer scorer(0.5);
    // "d" sees 0.0, 0.5, 1.0; "a" sees 0.1, 0.5, 0.5; b and c are flat.
    scorer.set("D", "A", 0.0);
    scorer.set("D", "C", 1.0);
    scorer.set("A", "B", 0.1);
    auto q = select_queries(items, 2, scorer, std::nullopt, 2);
    CHECK(q == std::vector<std::string>{"d", "a"});
    CHECK(scorer.calls() == 12);
}

TEST_CASE("select_queries ordering, balance and errors") {
    auto items = typed_items(10);
    std::vector<double> disp{0.1, 0.9, 0.3, 0.8, 0.3, 0.7, 0.2, 0.6, 0.05, 0.5};
    CHECK(select_queries(items, disp, 3) == std::vector<std::string>{"i01", "i03", "i05"});
    // Ties by ascending id.
    auto seven = select_queries(items, disp, 7);
    CHECK(seven[5] == "i02");
    CHECK(seven[6] == "i04");
    std::map<std::string, std::size_t> balance{{"conversation", 2}, {"lecture", 2}};
    auto q = select_queries(items, disp, 4, balance);
    CHECK(std::set<std::string>(q.begin(), q.end()) ==
          std::set<std::string>{"i01", "i03", "i02", "i04"});
    CHECK_THROWS_AS(select_queries(items, disp, 0), ValidationError);
    CHECK_THROWS_AS(select_queries(items, disp, 11), ValidationError);
    CHECK(select_queries(items, disp, 10).size() == 10);
    std::map<std::string, std::size_t> wrong_sum{{"conversation", 1}, {"lecture", 2}};
    CHECK_THROWS_AS(select_queries(items, disp, 4, wrong_sum), ValidationError);
    std::map<std::string, std::size_t> too_many{{"conversation", 6}, {"lecture", 0}};
    try {
        select_queries(items, disp, 6, too_many);
        FAIL("expected insufficient items");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("conversation") != std::string::npos);
    }
}

TEST_CASE("candidate selection sizes") {
    auto items = typed_items(24);
    std::vector<double> disp(24);
    for (std::size_t i = 0; i < 24; ++i) disp[i] = static_cast<double>(i % 7);
    std::vector<std::string> one{"i00"};
    auto c = select_candidates(items, disp, one, 23);
    CHECK(c.ids.size() == 23);
    CHECK(c.saturated);
    CHECK(std::find(c.ids.begin(), c.ids.end(), "i00") == c.ids.end());

    auto eight = select_queries(items, disp, 8);
    auto c8 = select_candidates(items, disp, eight, 23);
    CHECK(c8.ids.size() == 16);
    CHECK(c8.saturated);

    auto big = typed_items(300);
    std::vector<double> d300(300, 0.5);
    auto q = select_queries(big, d300, 8);
    auto c80 = select_candidates(big, d300, q, 80);
    CHECK(c80.ids.size() == 80);
    CHECK_FALSE(c80.saturated);
    for (const auto& id : q) {
        CHECK(std::find(c80.ids.begin(), c80.ids.end(), id) == c80.ids.end());
    }
}

TEST_CASE("build_pools shares candidates and excludes queries") {
    auto items = typed_items(12);
    std::vector<double> disp(12);
    for (std::size_t i = 0; i < 12; ++i) disp[i] = 0.1 * static_cast<double>(i);
    auto q = select_queries(items, disp, 3);
    auto c = select_candidates(items, disp, q, 5);
    auto pools = build_pools("story", items, disp, q, c);
    REQUIRE(pools.size() == 3);
    for (const auto& p : pools) {
        p.validate();
        CHECK(p.candidates.size() == 5);
        CHECK(p.meta.at("annotated") == false);
        for (const auto& cand : p.candidates) CHECK(cand.relevance == 0);
    }
}

TEST_CASE("agreement fixtures") {
    auto check = [](std::vector<int> a, std::vector<int> b) {
        auto g = agreement(a, b);
        std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
        CHECK(std::abs(g.kendall_tau_b - oracle::kendall_tau_b(da, db)) <= 1e-12);
        CHECK(std::abs(g.pearson_r - plain_pearson(da, db)) <= 1e-12);
        return g;
    };
    auto g = check({0, 1, 2, 3}, {0, 2, 1, 3});
    CHECK(std::abs(g.kendall_tau_b - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(g.spearman_rho - 0.8) <= 1e-12);

    g = check({0, 1, 2, 3}, {0, 1, 2, 3});
    CHECK(g.kendall_tau_b == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.spearman_rho == doctest::Approx(1.0).epsilon(1e-12));

    g = check({0, 1, 2, 3}, {3, 2, 1, 0});
    CHECK(g.kendall_tau_b == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(g.spearman_rho == doctest::Approx(-1.0).epsilon(1e-12));

    // Ties: tau-b with tie correction, rho on average ranks.
    g = check({0, 0, 1, 2}, {0, 1, 1, 2});
    const double rho = plain_pearson({1.5, 1.5, 3, 4}, {1, 2.5, 2.5, 4});
    CHECK(std::abs(g.spearman_rho - rho) <= 1e-12);
    CHECK(std::abs(g.kendall_tau_b - 4.0 / 5.0) <= 1e-12);

    g = agreement(std::vector<int>{2, 2, 2}, std::vector<int>{0, 1, 3});
    CHECK(std::isnan(g.kendall_tau_b));
    CHECK(std::isnan(g.spearman_rho));
    CHECK(std::isnan(g.pearson_r));
    CHECK(to_json_value(g).at("kendall_tau_b").is_null());
}

TEST_CASE("agreement is symmetric and matches the oracle on random labels") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> r(0, 3);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> a(2 + t % 20), b(a.size());
        for (auto& x : a) x = r(rng);
        for (auto& x : b) x = r(rng);
        auto ab = agreement(a, b);
        auto ba = agreement(b, a);
        if (std::isnan(ab.kendall_tau_b)) {
            CHECK(std::isnan(ba.kendall_tau_b));
            continue;
        }
        CHECK(std::abs(ab.kendall_tau_b - ba.kendall_tau_b) <= 1e-12);
        CHECK(std::abs(ab.spearman_rho - ba.spearman_rho) <= 1e-12);
        std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
        CHECK(std::abs(ab.kendall_tau_b - oracle::kendall_tau_b(da, db)) <= 1e-12);
        CHECK(ab.kendall_tau_b >= -1.0 - 1e-12);
        CHECK(ab.kendall_tau_b <= 1.0 + 1e-12);
    }
}

TEST_CASE("agreement input errors") {
    CHECK_THROWS_AS(agreement(std::vector<int>{1, 2}, std::vector<int>{1}), ValidationError);
    CHECK_THROWS_AS(agreement(std::vector<int>{1}, std::vector<int>{1}), ValidationError);
    CHECK_THROWS_AS(agreement(std::vector<int>{1, 4}, std::vector<int>{1, 2}), ValidationError);
    AnnotatorLabels a{{"x", 1}, {"y", 2}}, b{{"x", 1}, {"z", 2}};
    CHECK_THROWS_AS(agreement(a, b), ValidationError);
    AnnotatorLabels c{{"x", 0}, {"y", 3}};
    CHECK(agreement(a, c).pearson_r == doctest::Approx(1.0));
}

TEST_CASE("annotations load and apply") {
    testutil::TempDir dir("ann");
    {
        std::ofstream a(dir / "a.jsonl");
        a << R"({"query_id":"q","doc_id":"c1","rating":3})" << "\n"
          << R"({"query_id":"q","doc_id":"c2","rating":0})" << "\n";
        std::ofstream b(dir / "b.jsonl");
        b << R"({"query_id":"q","doc_id":"c1","rating":2})" << "\n"
          << R"({"query_id":"q","doc_id":"c2","rating":1})" << "\n";
        std::ofstream bad(dir / "bad.jsonl");
        bad << R"({"query_id":"q","doc_id":"c1","rating":5})" << "\n";
        std::ofstream dup(dir / "dup.jsonl");
        dup << R"({"query_id":"q","doc_id":"c1","rating":1})" << "\n"
            << R"({"query_id":"q","doc_id":"c1","rating":2})" << "\n";
    }
    std::vector<AnnotationSet> sets{load_annotations(dir / "a.jsonl"),
                                    load_annotations(dir / "b.jsonl")};
    CHECK_THROWS_AS(load_annotations(dir / "bad.jsonl"), ValidationError);
    CHECK_THROWS_AS(load_annotations(dir / "dup.jsonl"), ValidationError);

    RelevancePool pool;
    pool.facet = "story";
    pool.query_id = "q";
    pool.candidates = {{"c1", 0}, {"c2", 0}};
    std::vector<RelevancePool> pools{pool};
    apply_annotations(pools, sets);
    // (3 + 2) / 2 = 2.5 rounds up to 3; (0 + 1) / 2 = 0.5 rounds up to 1.
    CHECK(pools[0].candidates[0].relevance == 3);
    CHECK(pools[0].candidates[1].relevance == 1);
    CHECK(pools[0].meta.at("annotated") == true);
    REQUIRE(pools[0].annotator_labels);
    CHECK(pools[0].annotator_labels->size() == 2);
    pools[0].validate();

    auto g = pooled_agreement(pools, sets[0], sets[1]);
    CHECK(g.kendall_tau_b == doctest::Approx(1.0));
}

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "fable/error.hpp"
#include "fable/evaluate.hpp"
#include "oracles.hpp"

using namespace fable;

namespace {

// Candidate i sits at angle i * 0.1 from the query direction, so the
// cosine ranking is c0, c1, c2, ...
EmbeddingTable fan(std::size_t n) {
    EmbeddingTable t;
    t["q"] = {1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 0.1 * static_cast<double>(i);
        t["c" + std::to_string(i)] = {std::cos(a), std::sin(a)};
    }
    return t;
}

RelevancePool pool_of(const std::vector<int>& rels, std::string facet = "method",
                      std::string query = "q") {
    RelevancePool p;
    p.facet = std::move(facet);
    p.query_id = std::move(query);
    for (std::size_t i = 0; i < rels.size(); ++i) {
        p.candidates.push_back({"c" + std::to_string(i), rels[i]});
    }
    return p;
}

}  // namespace

TEST_CASE("similarity functions") {
    std::vector<double> a{1, 0}, b{0, 1}, c{2, 0};
    CHECK(similarity(a, b, Similarity::cosine) == doctest::Approx(0.0));
    CHECK(similarity(a, c, Similarity::cosine) == doctest::Approx(1.0));
    CHECK(similarity(a, c, Similarity::negative_euclidean) == doctest::Approx(-1.0));
    std::vector<double> d{1, 0, 0};
    CHECK_THROWS_AS(similarity(a, d, Similarity::cosine), ValidationError);
    CHECK(parse_similarity("negative_euclidean") == Similarity::negative_euclidean);
}

TEST_CASE("rank_pool orders by similarity then id") {
    auto t = fan(4);
    auto p = pool_of({0, 1, 2, 3});
    std::reverse(p.candidates.begin(), p.candidates.end());
    auto ranked = rank_pool(p, t, EvalConfig{});
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].doc_id == "c0");
    CHECK(ranked[3].doc_id == "c3");

    // Exact ties fall back to ascending id.
    t["c2"] = t["c0"];
    t["c1"] = t["c0"];
    ranked = rank_pool(p, t, EvalConfig{});
    CHECK(ranked[0].doc_id == "c0");
    CHECK(ranked[1].doc_id == "c1");
    CHECK(ranked[2].doc_id == "c2");
}

TEST_CASE("evaluate_run on a known ranking") {
    auto t = fan(10);
    std::vector<int> rels{0, 3, 0, 2, 0, 0, 1, 0, 0, 0};
    auto pools = std::vector<RelevancePool>{pool_of(rels)};
    EvalConfig config;
    auto report = evaluate_run(pools, t, config);
    REQUIRE(report.per_query.size() == 1);
    const auto& q = report.per_query[0];
    CHECK(q.cutoffs == std::vector<std::size_t>{1, 2});
    CHECK(q.ndcg[0] == doctest::Approx(oracle::ndcg(rels, 1)));
    CHECK(q.ndcg[1] == doctest::Approx(oracle::ndcg(rels, 2)));
    CHECK(q.average_precision == doctest::Approx(oracle::average_precision(rels)));
    CHECK(report.aggregated.queries == 1);
    CHECK(config.metric_names() == std::vector<std::string>{"ndcg_%10", "ndcg_%20", "map"});
}

TEST_CASE("aggregated means are unweighted over queries") {
    EmbeddingTable t = fan(5);
    t["q2"] = {std::cos(0.4), std::sin(0.4)};
    std::vector<RelevancePool> pools{pool_of({3, 0, 0, 0, 0}, "a", "q"),
                                     pool_of({3, 0, 0, 0, 0}, "b", "q2")};
    EvalConfig config;
    config.ndcg_percents = {0.2};
    auto report = evaluate_run(pools, t, config);
    const double m = (report.per_query[0].ndcg[0] + report.per_query[1].ndcg[0]) / 2.0;
    CHECK(report.aggregated.ndcg[0] == doctest::Approx(m));
    CHECK(report.per_query[0].ndcg[0] == 1.0);
    CHECK(report.per_facet.size() == 2);
}

TEST_CASE("missing embeddings are listed") {
    auto t = fan(3);
    t.erase("c1");
    std::vector<RelevancePool> pools{pool_of({1, 0, 2})};
    try {
        evaluate_run(pools, t, EvalConfig{});
        FAIL("expected a coverage error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("c1") != std::string::npos);
    }
}

TEST_CASE("zero-relevance pools warn and score zero") {
    auto t = fan(3);
    std::vector<RelevancePool> pools{pool_of({0, 0, 0})};
    auto report = evaluate_run(pools, t, EvalConfig{});
    CHECK(report.warnings.size() == 1);
    CHECK(report.per_query[0].ndcg[0] == 0.0);
}

TEST_CASE("report round trip") {
    auto t = fan(6);
    std::vector<RelevancePool> pools{pool_of({0, 1, 2, 3, 0, 1})};
    auto report = evaluate_run(pools, t, EvalConfig{});
    auto back = eval_report_from_json(to_json_value(report));
    CHECK(back.config.metric_names() == report.config.metric_names());
    REQUIRE(back.per_query.size() == 1);
    CHECK(back.per_query[0].ndcg == report.per_query[0].ndcg);
    CHECK(back.aggregated.map == doctest::Approx(report.aggregated.map));
    CHECK_THROWS_AS(eval_report_from_json(nlohmann::json::object()), ValidationError);
}

TEST_CASE("compare_runs") {
    auto t = fan(4);
    std::vector<RelevancePool> pools{pool_of({0, 0, 0, 3})};
    auto worse = evaluate_run(pools, t, EvalConfig{});
    std::vector<RelevancePool> better_pools{pool_of({3, 0, 0, 0})};
    auto better = evaluate_run(better_pools, t, EvalConfig{});
    auto cmp = compare_runs(worse, better);
    REQUIRE(cmp.per_query.size() == 1);
    CHECK(cmp.per_query[0].delta.at("map") > 0.0);
    CHECK(cmp.fraction_non_decreasing.at("map") == 1.0);
    CHECK(compare_runs(better, worse).fraction_non_decreasing.at("map") == 0.0);

    auto t2 = fan(4);
    t2["other"] = {1.0, 0.0};
    std::vector<RelevancePool> other{pool_of({0, 0, 0, 3}, "method", "other")};
    auto elsewhere = evaluate_run(other, t2, EvalConfig{});
    CHECK_THROWS_AS(compare_runs(worse, elsewhere), ValidationError);
}

TEST_CASE("embeddings file round trip and validation") {
    testutil::TempDir dir("emb");
    auto t = fan(3);
    std::vector<std::string> ids{"q", "c0", "c1", "c2"};
    write_embeddings(dir / "e.jsonl", ids, t);
    auto back = load_embeddings(dir / "e.jsonl");
    CHECK(back.size() == 4);
    CHECK(back.at("c1") == t.at("c1"));

    {
        std::ofstream out(dir / "dup.jsonl");
        out << R"({"id":"a","vector":[1,2]})" << "\n" << R"({"id":"a","vector":[1,2]})" << "\n";
    }
    CHECK_THROWS_AS(load_embeddings(dir / "dup.jsonl"), ValidationError);
    {
        std::ofstream out(dir / "ragged.jsonl");
        out << R"({"id":"a","vector":[1,2]})" << "\n" << R"({"id":"b","vector":[1]})" << "\n";
    }
    CHECK_THROWS_AS(load_embeddings(dir / "ragged.jsonl"), ValidationError);
}

TEST_CASE("embed_documents covers every document") {
    HashingEmbedder embedder(16, 1);
    std::vector<Document> docs{{"a", "alpha beta", {}, json::object()},
                               {"b", "gamma", {}, json::object()}};
    auto table = embed_documents(docs, embedder, 2);
    CHECK(table.size() == 2);
    CHECK(table.at("a").size() == 16);
}

TEST_CASE("config validation") {
    EvalConfig c;
    c.ndcg_percents = {};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.ndcg_percents = {1.2};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = EvalConfig{};
    c.map_threshold = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

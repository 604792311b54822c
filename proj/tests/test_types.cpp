#include <doctest.h>

#include <random>

#include "fable/error.hpp"
#include "fable/types.hpp"

using namespace fable;

TEST_CASE("schema construction") {
    CHECK_THROWS_AS(FacetSchema::make("x", {"only"}), ValidationError);
    CHECK_THROWS_AS(FacetSchema::make("x", {"a", "a"}), ValidationError);
    CHECK_THROWS_AS(FacetSchema::make("x", {"a", ""}), ValidationError);
    auto s = builtin_schema("abstract");
    CHECK(s.facets == std::vector<std::string>{"background", "method", "result"});
    CHECK(builtin_schema("education").facets ==
          std::vector<std::string>{"story", "question", "options"});
    CHECK(s.index_of("method") == 1);
    CHECK_FALSE(s.contains("options"));
    CHECK_THROWS_AS(builtin_schema("nope"), ValidationError);
}

TEST_CASE("aggregate_ratings rounds half up") {
    CHECK(aggregate_ratings(std::vector<int>{1, 2}) == 2);
    CHECK(aggregate_ratings(std::vector<int>{0, 1}) == 1);
    CHECK(aggregate_ratings(std::vector<int>{0, 0, 1}) == 0);
    CHECK(aggregate_ratings(std::vector<int>{2, 3, 3}) == 3);
    CHECK(aggregate_ratings(std::vector<int>{3}) == 3);
    CHECK_THROWS_AS(aggregate_ratings(std::vector<int>{4}), ValidationError);
    CHECK_THROWS_AS(aggregate_ratings(std::vector<int>{}), ValidationError);
}

TEST_CASE("enum string round trips") {
    for (auto k : {UnitKind::original, UnitKind::summary, UnitKind::similar, UnitKind::dissimilar,
                   UnitKind::regenerated}) {
        CHECK(parse_unit_kind(to_string(k)) == k);
    }
    for (auto m : {TripletMode::sample_one, TripletMode::cross_all, TripletMode::random_negative,
                   TripletMode::hard_negative}) {
        CHECK(parse_triplet_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_polarity("sideways"), ValidationError);
}

namespace {

std::string random_text(std::mt19937& g) {
    static const std::vector<std::string> pieces = {"a", "b", "xyz", " ", "\"", "\\", "\n",
                                                    "\t", "\xc3\xa9"};
    std::uniform_int_distribution<std::size_t> len(1, 20), pick(0, pieces.size() - 1);
    std::string s = "t";
    const auto n = len(g);
    for (std::size_t i = 0; i < n; ++i) s += pieces[pick(g)];
    return s;
}

}  // namespace

TEST_CASE("json round trip of every record type (property)") {
    std::mt19937 g(5);
    for (int trial = 0; trial < 200; ++trial) {
        Document d{"doc" + std::to_string(trial), random_text(g), {{"method", random_text(g)}},
                   json{{"type", "lecture"}}};
        CHECK(json(d).get<Document>() == d);

        FacetUnit u;
        u.unit_id = d.id + ":method:regenerated:r2";
        u.doc_id = d.id;
        u.facet = "method";
        u.kind = trial % 2 ? UnitKind::regenerated : UnitKind::dissimilar;
        u.text = random_text(g);
        if (trial % 3) u.score = std::uniform_real_distribution<double>(0, 1)(g);
        u.provenance = {"mock-gen", "abcd", u.kind == UnitKind::regenerated ? 2 : 0, "c", "p"};
        if (trial % 4 == 0) u.flags = {"hard_negative"};
        CHECK(json::parse(json(u).dump()).get<FacetUnit>() == u);

        PseudoDocument p{"x#method#neg#sd", d.id, {{"background", "a"}, {"method", "b"}},
                         "method", Polarity::negative, random_text(g)};
        CHECK(json(p).get<PseudoDocument>() == p);

        Triplet t{"method", "q", "p", "n", TripletMode::sample_one, d.id};
        CHECK(json(t).get<Triplet>() == t);

        RelevancePool pool{"method", "q", {{"c1", 2}, {"c2", 1}}, std::nullopt, json::object()};
        if (trial % 2) {
            pool.annotator_labels = std::vector<AnnotatorLabels>{{{"c1", 2}, {"c2", 1}},
                                                                 {{"c1", 2}, {"c2", 0}}};
        }
        CHECK(json(pool).get<RelevancePool>() == pool);
    }
}

TEST_CASE("record validation on parse") {
    CHECK_THROWS_AS(json::parse(R"({"id":"","text":"x"})").get<Document>(), ValidationError);
    CHECK_THROWS_AS(
        json::parse(R"({"unit_id":"u","doc_id":"d","facet":"f","kind":"summary","text":"t",)"
                    R"("score":1.5,"provenance":{"backend_id":"b","prompt_hash":"h"}})")
            .get<FacetUnit>(),
        ValidationError);
    CHECK_THROWS_AS(
        json::parse(R"({"unit_id":"u","doc_id":"d","facet":"f","kind":"similar","text":"t",)"
                    R"("provenance":{"backend_id":"b","prompt_hash":"h","mining_round":1}})")
            .get<FacetUnit>(),
        ValidationError);
    CHECK_THROWS_AS(json::parse(R"({"target_facet":"f","query_ref":"a","positive_ref":"a",)"
                                R"("negative_ref":"n","mode":"cross_all"})")
                        .get<Triplet>(),
                    ValidationError);
    CHECK_THROWS_AS(
        json::parse(R"({"facet":"f","query_id":"q","candidates":[{"doc_id":"c","relevance":1.5}]})")
            .get<RelevancePool>(),
        ValidationError);
}

TEST_CASE("pool invariants") {
    RelevancePool pool{"f", "q", {{"q", 1}}, std::nullopt, json::object()};
    CHECK_THROWS_AS(pool.validate(), ValidationError);
    pool.candidates = {{"a", 4}};
    CHECK_THROWS_AS(pool.validate(), ValidationError);
    pool.candidates = {{"a", 1}, {"a", 2}};
    CHECK_THROWS_AS(pool.validate(), ValidationError);
    pool.candidates = {{"a", 1}};
    pool.annotator_labels = std::vector<AnnotatorLabels>{{{"a", 1}}, {{"a", 2}}};
    CHECK_THROWS_AS(pool.validate(), ValidationError);  // mean 1.5 rounds to 2
    pool.candidates = {{"a", 2}};
    CHECK_NOTHROW(pool.validate());
}

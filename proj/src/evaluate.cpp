#include "fable/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fable/corpus.hpp"
#include "fable/error.hpp"
#include "fable/parallel.hpp"

namespace fable {

namespace {

MetricMeans mean_of(const std::vector<const QueryResult*>& queries, std::size_t percents) {
    MetricMeans m;
    m.ndcg.assign(percents, 0.0);
    m.queries = queries.size();
    if (queries.empty()) {
        return m;
    }
    for (const auto* q : queries) {
        for (std::size_t p = 0; p < percents; ++p) {
            m.ndcg[p] += q->ndcg[p];
        }
        m.map += q->average_precision;
    }
    for (auto& v : m.ndcg) {
        v /= static_cast<double>(queries.size());
    }
    m.map /= static_cast<double>(queries.size());
    return m;
}

nlohmann::json means_json(const MetricMeans& m, const std::vector<std::string>& names) {
    nlohmann::json j{{"queries", m.queries}};
    for (std::size_t p = 0; p < m.ndcg.size(); ++p) {
        j[names[p]] = m.ndcg[p];
    }
    j["map"] = m.map;
    return j;
}

MetricMeans means_from_json(const nlohmann::json& j, const std::vector<std::string>& names) {
    MetricMeans m;
    m.queries = j.at("queries").get<std::size_t>();
    for (std::size_t p = 0; p + 1 < names.size(); ++p) {
        m.ndcg.push_back(j.at(names[p]).get<double>());
    }
    m.map = j.at("map").get<double>();
    return m;
}

}  // namespace

Similarity parse_similarity(std::string_view text) {
    if (text == "cosine") return Similarity::cosine;
    if (text == "negative_euclidean") return Similarity::negative_euclidean;
    throw ValidationError("unknown similarity '" + std::string(text) +
                          "' (cosine, negative_euclidean)");
}

std::string_view to_string(Similarity similarity) {
    return similarity == Similarity::cosine ? "cosine" : "negative_euclidean";
}

void EvalConfig::validate() const {
    if (ndcg_percents.empty()) {
        throw ValidationError("at least one NDCG percent is required");
    }
    for (double p : ndcg_percents) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw ValidationError("NDCG percent " + std::to_string(p) + " outside (0, 1]");
        }
    }
    if (map_threshold < 1 || map_threshold > 3) {
        throw ValidationError("map_threshold must lie in 1-3");
    }
}

std::vector<std::string> EvalConfig::metric_names() const {
    std::vector<std::string> names;
    for (double p : ndcg_percents) {
        const double pct = p * 100.0;
        names.push_back(std::abs(pct - std::round(pct)) < 1e-9
                            ? fmt::format("ndcg_%{}", static_cast<long>(std::round(pct)))
                            : fmt::format("ndcg_%{}", pct));
    }
    names.push_back("map");
    return names;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    EmbeddingTable table;
    std::size_t dim = 0;
    std::size_t line = 0;
    for (const auto& record : read_jsonl<nlohmann::json>(path)) {
        ++line;
        std::string id;
        std::vector<double> vec;
        try {
            id = record.at("id").get<std::string>();
            vec = record.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ": record " + std::to_string(line) + ": " +
                                  e.what());
        }
        if (vec.empty()) {
            throw ValidationError(path.string() + ": empty vector for '" + id + "'");
        }
        if (dim == 0) {
            dim = vec.size();
        } else if (vec.size() != dim) {
            throw ValidationError(path.string() + ": vector for '" + id + "' has dimension " +
                                  std::to_string(vec.size()) + ", expected " +
                                  std::to_string(dim));
        }
        if (!table.emplace(std::move(id), std::move(vec)).second) {
            throw ValidationError(path.string() + ": duplicate embedding id on record " +
                                  std::to_string(line));
        }
    }
    return table;
}

void write_embeddings(const std::filesystem::path& path, std::span<const std::string> ids,
                      const EmbeddingTable& table) {
    std::vector<nlohmann::json> records;
    for (const auto& id : ids) {
        records.push_back({{"id", id}, {"vector", table.at(id)}});
    }
    write_jsonl(path, records);
}

EmbeddingTable embed_documents(std::span<const Document> docs, Embedder& embedder,
                               std::size_t concurrency) {
    auto vectors = parallel_map(docs.size(), concurrency,
                                [&](std::size_t i) { return embedder.embed(docs[i].text); });
    EmbeddingTable table;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        table[docs[i].id] = std::move(vectors[i]);
    }
    return table;
}

double similarity(std::span<const double> a, std::span<const double> b, Similarity kind) {
    if (a.size() != b.size()) {
        throw ValidationError("embedding dimension mismatch: " + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()));
    }
    if (kind == Similarity::negative_euclidean) {
        double sq = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            sq += (a[i] - b[i]) * (a[i] - b[i]);
        }
        return -std::sqrt(sq);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<RankedCandidate> rank_pool(const RelevancePool& pool, const EmbeddingTable& embeddings,
                                       const EvalConfig& config) {
    auto find = [&](const std::string& id) -> const std::vector<double>& {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw ValidationError("no embedding for '" + id + "'");
        }
        return it->second;
    };
    const auto& query = find(pool.query_id);
    std::vector<RankedCandidate> ranked;
    ranked.reserve(pool.candidates.size());
    for (const auto& c : pool.candidates) {
        ranked.push_back({c.doc_id, similarity(query, find(c.doc_id), config.similarity),
                          c.relevance});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.similarity != b.similarity) {
            return a.similarity > b.similarity;
        }
        return a.doc_id < b.doc_id;
    });
    return ranked;
}

double EvalReport::metric(const QueryResult& q, const std::string& name) const {
    if (name == "map") {
        return q.average_precision;
    }
    const auto names = config.metric_names();
    for (std::size_t p = 0; p + 1 < names.size(); ++p) {
        if (names[p] == name) {
            return q.ndcg[p];
        }
    }
    throw ValidationError("unknown metric '" + name + "'");
}

EvalReport evaluate_run(std::span<const RelevancePool> pools, const EmbeddingTable& embeddings,
                        const EvalConfig& config) {
    config.validate();
    std::set<std::string> missing;
    for (const auto& pool : pools) {
        pool.validate();
        if (!embeddings.contains(pool.query_id)) {
            missing.insert(pool.query_id);
        }
        for (const auto& c : pool.candidates) {
            if (!embeddings.contains(c.doc_id)) {
                missing.insert(c.doc_id);
            }
        }
    }
    if (!missing.empty()) {
        std::string list;
        std::size_t shown = 0;
        for (const auto& id : missing) {
            if (shown++ == 20) {
                list += ", ...";
                break;
            }
            list += (list.empty() ? "" : ", ") + id;
        }
        throw ValidationError("embeddings do not cover " + std::to_string(missing.size()) +
                              " pool ids: " + list);
    }

    EvalReport report;
    report.config = config;
    for (const auto& pool : pools) {
        if (pool.candidates.empty()) {
            throw ValidationError("pool " + pool.query_id + " has no candidates");
        }
        QueryResult q;
        q.facet = pool.facet;
        q.query_id = pool.query_id;
        q.ranking = rank_pool(pool, embeddings, config);
        std::vector<int> rels;
        for (const auto& r : q.ranking) {
            rels.push_back(r.relevance);
        }
        for (double p : config.ndcg_percents) {
            const std::size_t k = cutoff_k(p, rels.size());
            q.cutoffs.push_back(k);
            q.ndcg.push_back(ndcg_at(rels, k, config.gain));
        }
        q.average_precision = average_precision(rels, config.map_threshold);
        if (std::none_of(rels.begin(), rels.end(), [](int r) { return r > 0; })) {
            report.warnings.push_back("pool " + pool.facet + "/" + pool.query_id +
                                      " has no relevant candidates; NDCG and AP are 0");
        } else if (std::none_of(rels.begin(), rels.end(),
                                [&](int r) { return r >= config.map_threshold; })) {
            report.warnings.push_back("pool " + pool.facet + "/" + pool.query_id +
                                      " has no candidate at the MAP threshold; AP is 0");
        }
        report.per_query.push_back(std::move(q));
    }
    for (const auto& w : report.warnings) {
        spdlog::warn("evaluate: {}", w);
    }

    std::map<std::string, std::vector<const QueryResult*>> by_facet;
    std::vector<const QueryResult*> all;
    for (const auto& q : report.per_query) {
        by_facet[q.facet].push_back(&q);
        all.push_back(&q);
    }
    for (const auto& [facet, queries] : by_facet) {
        report.per_facet[facet] = mean_of(queries, config.ndcg_percents.size());
    }
    report.aggregated = mean_of(all, config.ndcg_percents.size());
    return report;
}

nlohmann::json to_json_value(const EvalReport& report) {
    const auto names = report.config.metric_names();
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& q : report.per_query) {
        nlohmann::json metrics;
        for (std::size_t p = 0; p < q.ndcg.size(); ++p) {
            metrics[names[p]] = q.ndcg[p];
        }
        metrics["map"] = q.average_precision;
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& r : q.ranking) {
            ranking.push_back(
                {{"doc_id", r.doc_id}, {"similarity", r.similarity}, {"relevance", r.relevance}});
        }
        per_query.push_back({{"facet", q.facet},
                             {"query_id", q.query_id},
                             {"cutoffs", q.cutoffs},
                             {"metrics", std::move(metrics)},
                             {"ranking", std::move(ranking)}});
    }
    nlohmann::json per_facet = nlohmann::json::object();
    for (const auto& [facet, m] : report.per_facet) {
        per_facet[facet] = means_json(m, names);
    }
    return {{"config",
             {{"ndcg_percents", report.config.ndcg_percents},
              {"gain", to_string(report.config.gain)},
              {"map_threshold", report.config.map_threshold},
              {"similarity", to_string(report.config.similarity)}}},
            {"metrics", names},
            {"per_query", std::move(per_query)},
            {"per_facet", std::move(per_facet)},
            {"aggregated", means_json(report.aggregated, names)},
            {"warnings", report.warnings},
            {"manifest", report.manifest}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport report;
    try {
        const auto& c = j.at("config");
        report.config.ndcg_percents = c.at("ndcg_percents").get<std::vector<double>>();
        report.config.gain = parse_gain(c.at("gain").get<std::string>());
        report.config.map_threshold = c.at("map_threshold").get<int>();
        report.config.similarity = parse_similarity(c.at("similarity").get<std::string>());
        const auto names = report.config.metric_names();
        for (const auto& q : j.at("per_query")) {
            QueryResult r;
            r.facet = q.at("facet").get<std::string>();
            r.query_id = q.at("query_id").get<std::string>();
            r.cutoffs = q.at("cutoffs").get<std::vector<std::size_t>>();
            const auto& m = q.at("metrics");
            for (std::size_t p = 0; p + 1 < names.size(); ++p) {
                r.ndcg.push_back(m.at(names[p]).get<double>());
            }
            r.average_precision = m.at("map").get<double>();
            for (const auto& c2 : q.value("ranking", nlohmann::json::array())) {
                r.ranking.push_back({c2.at("doc_id").get<std::string>(),
                                     c2.at("similarity").get<double>(),
                                     c2.at("relevance").get<int>()});
            }
            report.per_query.push_back(std::move(r));
        }
        for (const auto& [facet, m] : j.at("per_facet").items()) {
            report.per_facet[facet] = means_from_json(m, names);
        }
        report.aggregated = means_from_json(j.at("aggregated"), names);
        report.warnings = j.value("warnings", std::vector<std::string>{});
        report.manifest = j.value("manifest", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed evaluation report: ") + e.what());
    }
    return report;
}

RunComparison compare_runs(const EvalReport& a, const EvalReport& b) {
    const auto names = a.config.metric_names();
    if (names != b.config.metric_names()) {
        throw ValidationError("reports use different metric sets");
    }
    std::map<std::pair<std::string, std::string>, const QueryResult*> b_index;
    for (const auto& q : b.per_query) {
        b_index[{q.facet, q.query_id}] = &q;
    }
    if (b_index.size() != a.per_query.size()) {
        throw ValidationError("pool mismatch: reports cover different query sets");
    }
    RunComparison out;
    std::map<std::string, std::size_t> non_decreasing;
    for (const auto& qa : a.per_query) {
        auto it = b_index.find({qa.facet, qa.query_id});
        if (it == b_index.end()) {
            throw ValidationError("pool mismatch: query " + qa.facet + "/" + qa.query_id +
                                  " missing from the second report");
        }
        QueryDelta delta{qa.facet, qa.query_id, {}};
        for (const auto& name : names) {
            const double va = a.metric(qa, name);
            const double vb = b.metric(*it->second, name);
            delta.delta[name] = vb - va;
            if (vb >= va) {
                ++non_decreasing[name];
            }
        }
        out.per_query.push_back(std::move(delta));
    }
    for (const auto& name : names) {
        out.fraction_non_decreasing[name] =
            a.per_query.empty() ? 0.0
                                : static_cast<double>(non_decreasing[name]) /
                                      static_cast<double>(a.per_query.size());
    }
    return out;
}

nlohmann::json to_json_value(const RunComparison& comparison) {
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& q : comparison.per_query) {
        per_query.push_back({{"facet", q.facet}, {"query_id", q.query_id}, {"delta", q.delta}});
    }
    return {{"fraction_non_decreasing", comparison.fraction_non_decreasing},
            {"per_query", std::move(per_query)}};
}

}  // namespace fable

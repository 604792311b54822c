#include "fable/benchbuild.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fable/corpus.hpp"
#include "fable/error.hpp"
#include "fable/parallel.hpp"

namespace fable {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Indices sorted by dispersion descending, then id ascending.
std::vector<std::size_t> dispersion_order(std::span<const BenchItem> items,
                                          std::span<const double> dispersion) {
    if (dispersion.size() != items.size()) {
        throw ValidationError("dispersion vector does not match the item list");
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dispersion[a] != dispersion[b]) {
            return dispersion[a] > dispersion[b];
        }
        return items[a].id < items[b].id;
    });
    return order;
}

std::vector<double> to_double(std::span<const int> v) { return {v.begin(), v.end()}; }

void check_labels(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) {
        throw ValidationError("labelings have different lengths");
    }
    if (a.size() < 2) {
        throw ValidationError("agreement needs at least 2 items");
    }
    for (auto span : {a, b}) {
        for (int r : span) {
            if (r < 0 || r > 3) {
                throw ValidationError("rating " + std::to_string(r) + " outside 0-3");
            }
        }
    }
}

}  // namespace

std::vector<BenchItem> facet_items(std::span<const Document> docs, const std::string& facet) {
    std::vector<BenchItem> items;
    for (const auto& d : docs) {
        auto it = d.facet_labels.find(facet);
        if (it == d.facet_labels.end() || it->second.empty()) {
            throw ValidationError("item '" + d.id + "' has no label for facet '" + facet + "'");
        }
        items.push_back({d.id, d.meta.value("type", std::string()), it->second});
    }
    std::sort(items.begin(), items.end(),
              [](const BenchItem& a, const BenchItem& b) { return a.id < b.id; });
    std::set<std::string> seen_text;
    std::vector<BenchItem> unique;
    for (auto& item : items) {
        if (seen_text.insert(item.text).second) {
            unique.push_back(std::move(item));
        }
    }
    return unique;
}

ScoreMatrix score_matrix(std::span<const BenchItem> items, Scorer& scorer,
                         std::size_t concurrency) {
    const std::size_t n = items.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                pairs.emplace_back(i, j);
            }
        }
    }
    auto scores = parallel_map(pairs.size(), concurrency, [&](std::size_t k) {
        return scorer.score(items[pairs[k].first].text, items[pairs[k].second].text);
    });
    ScoreMatrix matrix(n, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        matrix[pairs[k].first][pairs[k].second] = scores[k];
    }
    return matrix;
}

std::vector<double> score_dispersion(const ScoreMatrix& matrix) {
    const std::size_t n = matrix.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) {
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum += matrix[i][j];
        }
        const double mean = sum / static_cast<double>(n - 1);
        double sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sq += (matrix[i][j] - mean) * (matrix[i][j] - mean);
        }
        out[i] = std::sqrt(sq / static_cast<double>(n - 1));
    }
    return out;
}

std::vector<std::string> select_queries(
    std::span<const BenchItem> items, std::span<const double> dispersion, std::size_t k,
    const std::optional<std::map<std::string, std::size_t>>& type_balance) {
    if (k == 0 || k > items.size()) {
        throw ValidationError("cannot select " + std::to_string(k) + " queries from " +
                              std::to_string(items.size()) + " items");
    }
    const auto order = dispersion_order(items, dispersion);
    std::vector<std::string> selected;
    if (!type_balance) {
        for (std::size_t i = 0; i < k; ++i) {
            selected.push_back(items[order[i]].id);
        }
        return selected;
    }
    std::size_t total = 0;
    for (const auto& [type, count] : *type_balance) {
        total += count;
    }
    if (total != k) {
        throw ValidationError("type balance sums to " + std::to_string(total) + ", expected " +
                              std::to_string(k));
    }
    auto remaining = *type_balance;
    for (auto idx : order) {
        auto it = remaining.find(items[idx].type);
        if (it == remaining.end() || it->second == 0) {
            continue;
        }
        --it->second;
        selected.push_back(items[idx].id);
        if (selected.size() == k) {
            break;
        }
    }
    for (const auto& [type, left] : remaining) {
        if (left > 0) {
            throw ValidationError("insufficient items of type '" + type + "': " +
                                  std::to_string(left) + " short");
        }
    }
    return selected;
}

std::vector<std::string> select_queries(
    std::span<const BenchItem> items, std::size_t k, Scorer& scorer,
    const std::optional<std::map<std::string, std::size_t>>& type_balance,
    std::size_t concurrency) {
    const auto dispersion = score_dispersion(score_matrix(items, scorer, concurrency));
    return select_queries(items, dispersion, k, type_balance);
}

CandidateSelection select_candidates(std::span<const BenchItem> items,
                                     std::span<const double> dispersion,
                                     std::span<const std::string> queries, std::size_t m) {
    const std::set<std::string> query_set(queries.begin(), queries.end());
    const auto order = dispersion_order(items, dispersion);
    CandidateSelection out;
    std::size_t remaining = 0;
    for (auto idx : order) {
        if (!query_set.contains(items[idx].id)) {
            ++remaining;
        }
    }
    out.saturated = m >= remaining;
    for (auto idx : order) {
        if (out.ids.size() == m) {
            break;
        }
        if (!query_set.contains(items[idx].id)) {
            out.ids.push_back(items[idx].id);
        }
    }
    return out;
}

std::vector<RelevancePool> build_pools(const std::string& facet, std::span<const BenchItem> items,
                                       std::span<const double> dispersion,
                                       std::span<const std::string> queries,
                                       const CandidateSelection& candidates) {
    std::map<std::string, double> spread;
    for (std::size_t i = 0; i < items.size(); ++i) {
        spread[items[i].id] = dispersion[i];
    }
    std::vector<RelevancePool> pools;
    for (const auto& q : queries) {
        RelevancePool pool;
        pool.facet = facet;
        pool.query_id = q;
        for (const auto& c : candidates.ids) {
            if (c != q) {
                pool.candidates.push_back({c, 0});
            }
        }
        pool.meta = {{"annotated", false},
                     {"dispersion", "population std of pairwise scores against all other "
                                    "same-facet items"},
                     {"query_dispersion", spread.at(q)},
                     {"candidates_saturated", candidates.saturated}};
        pools.push_back(std::move(pool));
    }
    return pools;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        return kNaN;
    }
    return sab / std::sqrt(saa * sbb);
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
    return pearson_r(average_ranks(a), average_ranks(b));
}

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
    long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            ++pairs;
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ++ties_a;
            if (db == 0.0) ++ties_b;
            if (da == 0.0 || db == 0.0) continue;
            ((da > 0) == (db > 0) ? concordant : discordant)++;
        }
    }
    const double denom = std::sqrt(static_cast<double>(pairs - ties_a) *
                                   static_cast<double>(pairs - ties_b));
    if (denom == 0.0) {
        return kNaN;
    }
    return static_cast<double>(concordant - discordant) / denom;
}

Agreement agreement(std::span<const int> labels_a, std::span<const int> labels_b) {
    check_labels(labels_a, labels_b);
    const auto a = to_double(labels_a);
    const auto b = to_double(labels_b);
    return {kendall_tau_b(a, b), spearman_rho(a, b), pearson_r(a, b)};
}

Agreement agreement(const AnnotatorLabels& labels_a, const AnnotatorLabels& labels_b) {
    if (labels_a.size() != labels_b.size()) {
        throw ValidationError("annotators labelled different id sets");
    }
    std::vector<int> a, b;
    for (const auto& [id, rating] : labels_a) {
        auto it = labels_b.find(id);
        if (it == labels_b.end()) {
            throw ValidationError("annotators labelled different id sets ('" + id + "')");
        }
        a.push_back(rating);
        b.push_back(it->second);
    }
    return agreement(a, b);
}

nlohmann::json to_json_value(const Agreement& agreement) {
    auto value = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return {{"kendall_tau_b", value(agreement.kendall_tau_b)},
            {"spearman_rho", value(agreement.spearman_rho)},
            {"pearson_r", value(agreement.pearson_r)}};
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
    AnnotationSet set;
    std::size_t line = 0;
    for (const auto& record : read_jsonl<nlohmann::json>(path)) {
        ++line;
        try {
            const auto query = record.at("query_id").get<std::string>();
            const auto doc = record.at("doc_id").get<std::string>();
            const auto& rating = record.at("rating");
            if (!rating.is_number_integer() || rating.get<int>() < 0 || rating.get<int>() > 3) {
                throw ValidationError("rating must be an integer 0-3");
            }
            if (!set[query].emplace(doc, rating.get<int>()).second) {
                throw ValidationError("duplicate rating for (" + query + ", " + doc + ")");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ": record " + std::to_string(line) + ": " +
                                  e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ": record " + std::to_string(line) + ": " +
                                  e.what());
        }
    }
    return set;
}

void apply_annotations(std::vector<RelevancePool>& pools,
                       std::span<const AnnotationSet> annotators) {
    for (auto& pool : pools) {
        std::vector<AnnotatorLabels> labels;
        for (const auto& set : annotators) {
            AnnotatorLabels mine;
            if (auto it = set.find(pool.query_id); it != set.end()) {
                for (const auto& c : pool.candidates) {
                    if (auto r = it->second.find(c.doc_id); r != it->second.end()) {
                        mine[c.doc_id] = r->second;
                    }
                }
            }
            labels.push_back(std::move(mine));
        }
        for (auto& c : pool.candidates) {
            std::vector<int> ratings;
            for (const auto& l : labels) {
                if (auto r = l.find(c.doc_id); r != l.end()) {
                    ratings.push_back(r->second);
                }
            }
            if (!ratings.empty()) {
                c.relevance = aggregate_ratings(ratings);
            }
        }
        pool.annotator_labels = std::move(labels);
        pool.meta["annotated"] = true;
        pool.meta["aggregation"] = "round_half_up_mean";
    }
}

Agreement pooled_agreement(std::span<const RelevancePool> pools, const AnnotationSet& a,
                           const AnnotationSet& b) {
    std::vector<int> la, lb;
    for (const auto& pool : pools) {
        auto qa = a.find(pool.query_id);
        auto qb = b.find(pool.query_id);
        if (qa == a.end() || qb == b.end()) {
            continue;
        }
        for (const auto& c : pool.candidates) {
            auto ra = qa->second.find(c.doc_id);
            auto rb = qb->second.find(c.doc_id);
            if (ra != qa->second.end() && rb != qb->second.end()) {
                la.push_back(ra->second);
                lb.push_back(rb->second);
            }
        }
    }
    return agreement(la, lb);
}

}  // namespace fable

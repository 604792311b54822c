#include "fable/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fable/error.hpp"
#include "fable/random.hpp"

namespace fable {

Gain parse_gain(std::string_view text) {
    if (text == "linear") return Gain::linear;
    if (text == "exponential") return Gain::exponential;
    throw ValidationError("unknown gain '" + std::string(text) + "' (linear, exponential)");
}

std::string_view to_string(Gain gain) {
    return gain == Gain::exponential ? "exponential" : "linear";
}

std::size_t cutoff_k(double percent, std::size_t pool_size) {
    if (!(percent > 0.0 && percent <= 1.0)) {
        throw ValidationError("NDCG percent must lie in (0, 1]");
    }
    return std::max<std::size_t>(1, round_half_up(percent * static_cast<double>(pool_size)));
}

double gain_of(int relevance, Gain gain) {
    if (relevance < 0 || relevance > 3) {
        throw ValidationError("relevance " + std::to_string(relevance) + " outside 0-3");
    }
    return gain == Gain::exponential ? std::exp2(relevance) - 1.0 : relevance;
}

double dcg_at(std::span<const int> ranked_relevances, std::size_t k, Gain gain) {
    double dcg = 0.0;
    const std::size_t n = std::min(k, ranked_relevances.size());
    for (std::size_t i = 0; i < n; ++i) {
        dcg += gain_of(ranked_relevances[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

double ndcg_at(std::span<const int> ranked_relevances, std::size_t k, Gain gain) {
    if (k < 1 || k > ranked_relevances.size()) {
        throw ValidationError("NDCG cutoff " + std::to_string(k) + " outside [1, " +
                              std::to_string(ranked_relevances.size()) + "]");
    }
    for (int r : ranked_relevances) {
        gain_of(r, gain);
    }
    std::vector<int> ideal(ranked_relevances.begin(), ranked_relevances.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg_at(ideal, k, gain);
    const double dcg = dcg_at(ranked_relevances, k, gain);
    if (idcg == 0.0) {
        return 0.0;
    }
    if (dcg == idcg) {
        return 1.0;
    }
    return dcg / idcg;
}

double average_precision(std::span<const int> ranked_relevances, int threshold) {
    if (ranked_relevances.empty()) {
        throw ValidationError("average precision of an empty ranking");
    }
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked_relevances.size(); ++i) {
        gain_of(ranked_relevances[i], Gain::linear);
        if (ranked_relevances[i] >= threshold) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

}  // namespace fable

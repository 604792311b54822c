#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace fable {

enum class Gain { linear, exponential };

Gain parse_gain(std::string_view text);
std::string_view to_string(Gain gain);

/// Cutoff for NDCG at a fraction of the pool: max(1, round_half_up(percent * pool_size)).
std::size_t cutoff_k(double percent, std::size_t pool_size);

/// g(r) = r (linear) or 2^r - 1 (exponential).
double gain_of(int relevance, Gain gain);

/// Sum over ranks i = 1..k of g(rel_i) / log2(i + 1).
double dcg_at(std::span<const int> ranked_relevances, std::size_t k, Gain gain);

/// DCG@k / IDCG@k. Returns 0 when the pool has no relevant item.
/// Throws ValidationError when k is 0 or exceeds the list length, or a
/// relevance lies outside 0-3.
double ndcg_at(std::span<const int> ranked_relevances, std::size_t k, Gain gain = Gain::linear);

/// Mean of precision@i over ranks i holding a relevant item (relevance >= threshold).
/// Returns 0 when nothing is relevant. Throws on an empty ranking.
double average_precision(std::span<const int> ranked_relevances, int threshold = 1);

}  // namespace fable

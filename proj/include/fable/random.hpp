#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace fable {

/// Derives an independent stream seed for one labelled stage from the run seed,
/// so that every stage is reproducible on its own.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Seeded generator whose draws do not depend on the standard library's
/// distribution implementations (those vary between vendors).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

    /// Uniform real in [0, 1).
    double uniform_real();

    /// Standard normal draw (Box-Muller).
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            using std::swap;
            swap(values[i - 1], values[j]);
        }
    }

    /// `count` distinct indices out of [0, n), returned in ascending order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

private:
    std::mt19937_64 engine_;
};

/// floor(x + 1/2) with a small tolerance so that products such as 0.3 * 5
/// land on the half they denote in decimal.
std::size_t round_half_up(double x);

}  // namespace fable

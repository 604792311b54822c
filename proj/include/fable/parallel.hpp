#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace fable {

/// Result of one task in a batch: either a value or the exception it threw.
template <typename T>
struct Outcome {
    std::optional<T> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }
};

/// Runs `fn(i)` for i in [0, count) on at most `max_concurrency` threads.
/// Outcomes are returned in index order regardless of completion order.
template <typename Fn>
auto parallel_try_map(std::size_t count, std::size_t max_concurrency, Fn&& fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, std::size_t>>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<Outcome<R>> out(count);
    auto run_one = [&](std::size_t i) {
        try {
            out[i].value.emplace(fn(i));
        } catch (...) {
            out[i].error = std::current_exception();
        }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(max_concurrency, 1), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            run_one(i);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    run_one(i);
                }
            });
        }
    }
    return out;
}

/// As parallel_try_map, but rethrows the lowest-index failure after all tasks finish.
template <typename Fn>
auto parallel_map(std::size_t count, std::size_t max_concurrency, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    auto outcomes = parallel_try_map(count, max_concurrency, std::forward<Fn>(fn));
    std::vector<std::invoke_result_t<Fn&, std::size_t>> values;
    values.reserve(count);
    for (auto& o : outcomes) {
        if (o.error) {
            std::rethrow_exception(o.error);
        }
        values.push_back(std::move(*o.value));
    }
    return values;
}

}  // namespace fable

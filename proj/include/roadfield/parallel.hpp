#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace roadfield {

/// Worker cap: ROADFIELD_THREADS if set to a positive integer, else the
/// machine parallelism.
inline unsigned worker_limit() {
    if (const char* env = std::getenv("ROADFIELD_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(0..n-1) on up to worker_limit() threads and returns the results in
/// index order. If several jobs throw, the exception of the lowest index is
/// rethrown, so failures are reported deterministically.
template <typename F>
auto parallel_map(std::size_t n, F&& f) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using T = std::invoke_result_t<F&, std::size_t>;
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_limit(), n));

    auto run = [&](std::size_t k) {
        try {
            slots[k].emplace(f(k));
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };

    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) run(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < n; k = next++) run(k);
            });
        for (auto& t : pool) t.join();
    }

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace roadfield

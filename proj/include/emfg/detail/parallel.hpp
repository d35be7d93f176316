#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace emfg::detail {

/// Worker cap from MFG_THREADS; 1 when unset or malformed.
inline int threads_from_env() {
    const char* raw = std::getenv("MFG_THREADS");
    if (raw == nullptr) return 1;
    try {
        const int n = std::stoi(raw);
        return std::max(1, n);
    } catch (...) {
        return 1;
    }
}

/// Static contiguous partition of [0, n). Each index is visited exactly once, so
/// results are bitwise identical to the sequential loop as long as fn(i) only
/// writes to slot i.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2 * workers) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace emfg::detail

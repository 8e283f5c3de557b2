#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace bdsde {

/// Number of worker threads to use: BDSDE_FILTER_THREADS when set to a
/// positive integer, hardware concurrency otherwise.
inline int thread_budget() {
    if (const char* env = std::getenv("BDSDE_FILTER_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1 && v <= 4096) return static_cast<int>(v);
    }
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw < 1 ? 1 : hw;
}

/// Chunked parallel loop over [0, n). Each index is visited exactly once,
/// by exactly one thread, so writes to per-index slots need no locking and
/// results are independent of the thread count.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
    if (n <= 0) return;
    const int workers = std::min(thread_budget(), n);
    if (workers <= 1 || n < 32) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace bdsde

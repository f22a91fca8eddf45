#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace gsda {

// Worker cap from GSDA_THREADS. Defaults to 1 so runs are deterministic
// unless the user opts in to more workers.
inline int thread_count() {
    static const int cached = [] {
        const char* env = std::getenv("GSDA_THREADS");
        if (!env) return 1;
        const int n = std::atoi(env);
        return n >= 1 ? n : 1;
    }();
    return cached;
}

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed by exactly one worker, so row-local work is bit-reproducible
// at any worker count. workers = 0 reads GSDA_THREADS.
inline void parallel_for(size_t n, const std::function<void(size_t, size_t)>& body,
                         int workers = 0) {
    if (workers <= 0) workers = thread_count();
    if (workers <= 1 || n < 2048) {
        body(0, n);
        return;
    }
    const size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        const size_t lo = std::min(n, w * chunk);
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace gsda

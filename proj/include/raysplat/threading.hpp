// Static-partition parallel loop. Work items are independent; result
// determinism never depends on the thread count because callers either write
// disjoint slots or merge per-index partials in index order.
#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace raysplat {

inline int effective_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    threads = std::min(effective_threads(threads), std::max(n, 1));
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn]() {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace raysplat

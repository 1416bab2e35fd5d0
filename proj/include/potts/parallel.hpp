#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace potts {

// Runs fn(begin, end) over a partition of [0, n) on `threads` workers.
// Work items must be independent; callers that need randomness give each
// item its own derived rng so the partitioning never shows in the output.
template <class F>
void parallel_for(std::int64_t n, int threads, F&& fn) {
    if (n <= 0) return;
    threads = std::max(1, threads);
    const std::int64_t chunks = std::min<std::int64_t>(threads, n);
    if (chunks == 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(chunks));
    const std::int64_t step = (n + chunks - 1) / chunks;
    for (std::int64_t c = 0; c < chunks; ++c) {
        const std::int64_t begin = c * step;
        const std::int64_t end = std::min(n, begin + step);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace potts

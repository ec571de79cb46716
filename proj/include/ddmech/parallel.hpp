#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace ddm {

// Deterministic parallel loop: the index space is split into contiguous
// chunks, every iteration writes only its own slot, so results are identical
// to the serial run for any thread count.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t begin, std::size_t end)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    threads = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t b = t * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace ddm

#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mml {

/// Worker count from MML_THREADS (default 1).
int thread_count();

/// Runs f(begin, end) over a static partition of [0, n). Results must not depend on the partition.
template <class F>
void parallel_for(std::size_t n, F&& f)
{
    const std::size_t threads = static_cast<std::size_t>(thread_count());
    if (threads <= 1 || n < 2048) {
        f(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 1; t < threads; ++t) {
        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
        if (b < e)
            pool.emplace_back([&f, b, e] { f(b, e); });
    }
    f(std::size_t{0}, std::min(n, chunk));
    for (auto& th : pool)
        th.join();
}

} // namespace mml

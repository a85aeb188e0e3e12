#include "atlab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace atlab {

int worker_threads() {
    static const int n = [] {
        if (const char* env = std::getenv("ATLAB_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    const int workers = worker_threads();
    if (workers <= 1 || n < 2) {
        body(0, n);
        return;
    }
    const std::int64_t chunks = std::min<std::int64_t>(workers, n);
    const std::int64_t grain = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(chunks) - 1);
    for (std::int64_t c = 1; c < chunks; ++c) {
        const std::int64_t lo = c * grain;
        const std::int64_t hi = std::min<std::int64_t>(n, lo + grain);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    body(0, std::min<std::int64_t>(n, grain));
    for (auto& t : pool) t.join();
}

}  // namespace atlab

#include "evasplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace evasplat {

namespace {
std::atomic<int> g_workers{0};
}

void set_worker_count(int n) { g_workers.store(n < 0 ? 0 : n); }

int worker_count() {
    int n = g_workers.load();
    if (n == 0) {
        unsigned hc = std::thread::hardware_concurrency();
        n = hc == 0 ? 1 : static_cast<int>(hc);
    }
    return n;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    const std::int64_t count = end - begin;
    if (count <= 0) return;

    const int workers = std::min<std::int64_t>(worker_count(), count);
    if (workers <= 1) {
        fn(begin, end);
        return;
    }

    const std::int64_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = begin + w * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace evasplat

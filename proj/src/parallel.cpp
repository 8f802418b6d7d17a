#include "bsdei/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace bsdei {

namespace {
std::atomic<unsigned> g_max_threads{0};  // 0 = use hardware concurrency
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    unsigned n = g_max_threads.load();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

namespace detail {

void parallel_for_impl(std::size_t n, void* ctx, void (*body)(void*, std::size_t, std::size_t)) {
    if (n == 0) return;

    // Chunking depends only on n, so identical work units are issued no matter
    // how many workers execute them.
    const std::size_t chunk = std::max<std::size_t>(1, n / 64);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;

    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(max_threads(), n_chunks));
    if (workers <= 1) {
        body(ctx, 0, n);
        return;
    }

    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            const std::size_t lo = c * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            body(ctx, lo, hi);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

}  // namespace detail

}  // namespace bsdei

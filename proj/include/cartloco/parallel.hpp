#pragma once
// Deterministic fork-join helper. Work items write only their own preallocated slot, so
// results are schedule-independent; reductions happen after the join in index order.
// Worker count comes from CARTLOCO_THREADS (default 1 — the only environment variable
// the library reads).

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cartloco::harness {

inline int thread_count() {
    const char* s = std::getenv("CARTLOCO_THREADS");
    if (!s || !*s) return 1;
    const int n = std::atoi(s);
    return n < 1 ? 1 : n;
}

// Runs fn(0..n-1), striped over workers. fn must touch only state owned by its index.
// The first exception wins and is rethrown on the caller after all workers join.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    if (n <= 0) return;
    const int workers = thread_count() < n ? thread_count() : n;
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first;
    std::mutex first_mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                if (failed.load(std::memory_order_relaxed)) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(first_mu);
                    if (!first) first = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace cartloco::harness

// Deterministic task parallelism: tasks write to index-addressed slots, so
// results never depend on the worker count. PRTEST_THREADS caps workers.

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace prtest {

inline int worker_count(int requested = 0) {
    int n = requested;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* cap = std::getenv("PRTEST_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1 && c < n) n = c;
    }
    return n;
}

// Runs fn(i) for i in [0, n_tasks); fn must only write to its own slot.
// If tasks throw, the exception from the lowest task index is rethrown
// after all workers finish, independent of scheduling.
inline void parallel_for(std::size_t n_tasks, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n_tasks);
    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_tasks));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace prtest

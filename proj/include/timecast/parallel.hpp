#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace timecast {

// Worker count, capped by TIMECAST_THREADS when set.
inline int thread_budget() {
    int budget = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("TIMECAST_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) budget = std::min(budget, cap);
    }
    return budget;
}

// Runs fn(i) for i in [0, n). Rethrows the first exception raised by any task.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace timecast

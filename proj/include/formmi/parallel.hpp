#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace formmi {

inline int default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(0..n_tasks-1) on up to `workers` threads. Tasks must write only to
// their own output slot; results are then independent of the worker count.
// The first exception thrown by any task is rethrown on the caller.
inline void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn) {
    if (n_tasks <= 0) return;
    if (workers <= 1 || n_tasks == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    if (workers > n_tasks) workers = n_tasks;
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto body = [&]() {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= n_tasks) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace formmi

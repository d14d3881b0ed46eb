#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace senslab {

/// Runs f(i) for i in [0, n) on up to `workers` threads.
///
/// Each index is an independent unit writing only to its own output slot,
/// so results are identical for any worker count. Exceptions are captured
/// and the first one rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::size_t thread_count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < thread_count; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += thread_count) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace senslab

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace vfiqa {

// Worker count resolution: explicit request > VFIQA_WORKERS env var >
// hardware concurrency. Always at least 1.
inline std::size_t default_workers() {
    if (const char* env = std::getenv("VFIQA_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

inline std::size_t resolve_workers(std::size_t requested) {
    return requested >= 1 ? requested : default_workers();
}

// Runs fn(i) for i in [begin, end) across up to `workers` threads. Results
// must be written to disjoint, preallocated slots keyed by i; that plus a
// sequential reduction afterwards keeps outputs bit-identical for any worker
// count. The first exception thrown by any fn is rethrown on the caller.
inline void parallel_for(std::size_t begin, std::size_t end, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
    const std::size_t n = end > begin ? end - begin : 0;
    if (n == 0) return;
    workers = resolve_workers(workers);
    if (workers > n) workers = n;
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{begin};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= end) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace vfiqa

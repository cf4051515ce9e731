#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtm {

// Runs fn(k) for k in [0, count) on up to `workers` threads. Each index is
// handled exactly once, so writing into slot k of a preallocated vector gives
// results in input order regardless of scheduling. The first exception thrown
// by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
    if (workers <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        while (true) {
            const auto k = next.fetch_add(1);
            if (k >= count) return;
            try {
                fn(k);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    const auto threads = std::min<std::size_t>(workers, count);
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace mtm

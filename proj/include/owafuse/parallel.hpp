#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace owafuse {

// Runs fn(i) for i in [0, count). Work items must be independent and write
// only to their own slots, so the result is identical for every job count.
inline void parallel_for(std::int64_t count, int jobs,
                         const std::function<void(std::int64_t)>& fn) {
    if (count <= 0) return;
    if (jobs <= 1 || count == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int nthreads = static_cast<int>(std::min<std::int64_t>(jobs, count));
    std::vector<std::thread> threads;
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    threads.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        threads.emplace_back([&, t]() {
            try {
                for (std::int64_t i = t; i < count; i += nthreads) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace owafuse

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace modigen {

/// Runs fn(worker, index) for every index in [0, count) on at most `workers` threads.
/// Indices are handed out in ascending order. The first exception thrown by any call
/// is rethrown after all threads have joined; remaining indices are abandoned.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (count == 0) return;
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(std::size_t{0}, i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            while (!stop.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(w, i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    stop.store(true);
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace modigen

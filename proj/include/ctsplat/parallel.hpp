// parallel.hpp: minimal parallel index loop.
//
// Work items are claimed from an atomic counter, so scheduling varies between
// runs; every call site therefore writes only to outputs owned by its index
// (or to per-index slots reduced later in a fixed order), which keeps all
// results bit-identical for any worker count.
#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "ctsplat/threading.hpp"

namespace ctsplat {

template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
    const int len = end - begin;
    if (len <= 0) return;
    const int workers = std::min(thread_count(), len);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }

    std::atomic<int> next{begin};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        try {
            while (!failed.load(std::memory_order_relaxed)) {
                const int i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= end) break;
                fn(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace ctsplat

#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sinc {

/// Runs body(i) for i in [0, count) over contiguous static chunks. The body
/// must only write to slot i, so results do not depend on the thread count.
template <class Body>
void parallel_for(long count, int threads, Body&& body)
{
    if (count <= 0) {
        return;
    }
    const long workers = std::clamp<long>(threads, 1, count);
    if (workers == 1) {
        for (long i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (long w = 0; w < workers; ++w) {
        const long begin = count * w / workers;
        const long end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (long i = begin; i < end; ++i) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace sinc

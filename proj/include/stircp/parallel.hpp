#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stircp {

// Worker count from STIRCP_WORKERS, else the hardware concurrency.
int default_workers();

// Runs body(i) for i in [0, count) on up to `workers` threads and returns the
// results by index. Reductions over the result vector are therefore
// independent of the worker count.
template <typename R, typename F>
std::vector<R> run_replicas(std::size_t count, int workers, F&& body) {
    std::vector<R> out(count);
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) out[i] = body(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                out[i] = body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace stircp

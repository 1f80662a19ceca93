#ifndef VRPF_PARALLEL_HPP
#define VRPF_PARALLEL_HPP

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vrpf {

/// Worker count: VRPF_WORKERS env var if set, hardware concurrency otherwise.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("VRPF_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(i) for i in [0, n) across workers. Each index must be
/// independent (replications use per-index derived seeds), so outputs are
/// identical for any worker count. The first exception thrown is rethrown
/// on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t workers = worker_count()) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    const std::size_t used = workers < n ? workers : n;
    threads.reserve(used);
    for (std::size_t w = 0; w < used; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += used) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (error) return;
                }
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace vrpf

#endif  // VRPF_PARALLEL_HPP

#include "tracelr/parallel.hpp"

#include <algorithm>
#include <mutex>

namespace tracelr {

int effective_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

void run_workers(int threads, const std::function<void()>& worker) {
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t chunk) {
    if (n == 0) return;
    const int t = effective_threads(threads);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    if (t <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    run_workers(std::min<int>(t, static_cast<int>(n_chunks)), [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                fn(c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    });
    if (error) std::rethrow_exception(error);
}

void parallel_tasks(std::size_t n_tasks, int threads,
                    const std::function<void(std::size_t)>& fn) {
    if (n_tasks == 0) return;
    const int t = std::min<int>(effective_threads(threads), static_cast<int>(n_tasks));
    if (t <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    run_workers(t, [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    });
    if (error) std::rethrow_exception(error);
}

} // namespace tracelr

#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

// Workers partition [0, n) into contiguous chunks, one per worker, so the
// result never depends on the worker count as long as per-index work is
// order-free across indices (each output element is computed by exactly one
// worker with a fixed internal order).

namespace pnn {

class ThreadPool {
public:
    explicit ThreadPool(int workers) : workers_(workers < 1 ? 1 : workers) {}

    int workers() const { return workers_; }

    void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) const {
        if (n <= 0) return;
        int w = workers_;
        if (w > n) w = int(n);
        if (w == 1) {
            fn(0, n);
            return;
        }
        std::vector<std::thread> threads;
        threads.reserve(size_t(w - 1));
        std::exception_ptr first_error;
        std::mutex err_mu;
        auto run = [&](int64_t b, int64_t e) {
            try {
                fn(b, e);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        };
        for (int i = 1; i < w; ++i) {
            int64_t b = n * i / w, e = n * (i + 1) / w;
            threads.emplace_back(run, b, e);
        }
        run(0, n / w);
        for (auto& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

private:
    int workers_;
};

}  // namespace pnn

#pragma once

// Index-parallel evaluation with results whose reduction does not depend on
// the number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace qcorr {

// out[i] = fn(i) for i in [0, n). Workers take contiguous chunks; the first
// exception thrown by any worker is rethrown on the calling thread.
template <class Fn>
std::vector<double> parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
    std::vector<double> out(n);
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = fn(i);
        }
        return out;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) {
                break;
            }
            pool.emplace_back([&, lo, hi] {
                try {
                    for (std::size_t i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i) {
                        out[i] = fn(i);
                    }
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    failed = true;
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

// Fixed-shape pairwise summation: the grouping depends only on x.size().
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double acc = 0.0;
        for (double v : x) {
            acc += v;
        }
        return acc;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
};

inline MeanStderr mean_and_stderr(std::span<const double> x) {
    MeanStderr r;
    if (x.empty()) {
        return r;
    }
    const auto n = static_cast<double>(x.size());
    r.mean = pairwise_sum(x) / n;
    if (x.size() > 1) {
        std::vector<double> sq(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - r.mean;
            sq[i] = d * d;
        }
        r.stderr_of_mean = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    return r;
}

}  // namespace qcorr

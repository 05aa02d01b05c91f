#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace heatlab {

// Pairwise (tree-ordered) summation. The reduction order depends only on the
// element count, never on thread partitioning, so results are bit-identical
// regardless of worker count.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 32) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}

// Runs fn(i) for i in [0, n). Each index writes its own slot; no index
// depends on the partition, so outputs are worker-count independent.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::exception_ptr error;
    std::mutex guard;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < n; i += static_cast<std::size_t>(workers)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(guard);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Mean and standard error of a Monte Carlo sample set evaluated in fixed-size
// batches. Batch boundaries are independent of the thread count.
struct McMoments {
    double mean = 0.0;
    double std_error = 0.0;
    long long samples = 0;
};

inline McMoments mc_accumulate(long long total, int threads,
                               const std::function<double(std::size_t, class Rng&)>& sample,
                               const class Rng& base);

}  // namespace heatlab

#include "heatlab/rng.hpp"

namespace heatlab {

inline McMoments mc_accumulate(long long total, int threads,
                               const std::function<double(std::size_t, Rng&)>& sample,
                               const Rng& base) {
    constexpr long long kBatch = 4096;
    const std::size_t nbatches = static_cast<std::size_t>((total + kBatch - 1) / kBatch);
    std::vector<double> sums(nbatches), sqsums(nbatches);
    parallel_for(nbatches, threads, [&](std::size_t b) {
        Rng rng = base.split(b);
        const long long lo = static_cast<long long>(b) * kBatch;
        const long long hi = std::min(total, lo + kBatch);
        double s = 0.0, s2 = 0.0;
        for (long long i = lo; i < hi; ++i) {
            const double x = sample(static_cast<std::size_t>(i), rng);
            s += x;
            s2 += x * x;
        }
        sums[b] = s;
        sqsums[b] = s2;
    });
    const double s = pairwise_sum(sums);
    const double s2 = pairwise_sum(sqsums);
    McMoments m;
    m.samples = total;
    m.mean = s / static_cast<double>(total);
    const double var = std::max(0.0, s2 / static_cast<double>(total) - m.mean * m.mean);
    m.std_error = std::sqrt(var / static_cast<double>(total));
    return m;
}

}  // namespace heatlab

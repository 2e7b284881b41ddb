#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace uxmc {

/// Fixed-size worker pool with static partitioning. A parallel_for over
/// [0, n) is cut into `num_chunks()` contiguous chunks; chunk c always
/// covers the same range for a given n, which keeps per-chunk reductions
/// reproducible for a fixed thread count.
class ThreadPool {
public:
    explicit ThreadPool(std::size_t num_threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    std::size_t size() const noexcept { return workers_.size() + 1; }

    /// fn(chunk_index, begin, end). Blocks until all chunks finished.
    /// Exceptions from any chunk are rethrown on the calling thread.
    void run_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

private:
    void worker_loop(std::size_t id);

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t, std::size_t, std::size_t)>* job_ = nullptr;
    std::size_t job_n_ = 0;
    std::size_t generation_ = 0;
    std::size_t pending_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

/// Process-wide kernel parallelism. 1 means fully serial execution.
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Chunk range of chunk c when [0, n) is cut into k parts.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, std::size_t k, std::size_t c) {
    const std::size_t base = n / k, extra = n % k;
    const std::size_t begin = c * base + (c < extra ? c : extra);
    return {begin, begin + base + (c < extra ? 1 : 0)};
}

/// Upper bound (exclusive) on the chunk index parallel_for_chunks passes for n
/// items. Some chunks may be empty. Calls must not be nested.
std::size_t parallel_chunks(std::size_t n);

/// fn(begin, end) over disjoint contiguous ranges covering [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// Like parallel_for but also passes the chunk index (for per-worker buffers).
void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace uxmc

#include "uxmc/parallel.hpp"

#include <algorithm>
#include <memory>

namespace uxmc {

ThreadPool::ThreadPool(std::size_t num_threads) {
    const std::size_t extra = num_threads > 1 ? num_threads - 1 : 0;
    workers_.reserve(extra);
    for (std::size_t i = 0; i < extra; ++i) {
        workers_.emplace_back([this, i] { worker_loop(i + 1); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : workers_) t.join();
}

void ThreadPool::run_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t k = size();
    if (k == 1 || n < 2) {
        if (n > 0) fn(0, 0, n);
        return;
    }
    {
        std::lock_guard lock(mutex_);
        job_ = &fn;
        job_n_ = n;
        pending_ = workers_.size();
        error_ = nullptr;
        ++generation_;
    }
    wake_.notify_all();

    std::exception_ptr local;
    try {
        auto [b, e] = chunk_range(n, k, 0);
        if (b < e) fn(0, b, e);
    } catch (...) {
        local = std::current_exception();
    }

    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (local) std::rethrow_exception(local);
    if (error_) std::rethrow_exception(error_);
}

void ThreadPool::worker_loop(std::size_t id) {
    std::size_t seen = 0;
    for (;;) {
        const std::function<void(std::size_t, std::size_t, std::size_t)>* job;
        std::size_t n;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
            n = job_n_;
        }
        std::exception_ptr err;
        try {
            auto [b, e] = chunk_range(n, size(), id);
            if (b < e) (*job)(id, b, e);
        } catch (...) {
            err = std::current_exception();
        }
        {
            std::lock_guard lock(mutex_);
            if (err && !error_) error_ = err;
            if (--pending_ == 0) done_.notify_one();
        }
    }
}

namespace {

struct PoolHolder {
    std::mutex mutex;
    std::size_t threads = 1;
    std::unique_ptr<ThreadPool> pool;
};

PoolHolder& holder() {
    static PoolHolder h;
    return h;
}

ThreadPool* current_pool() {
    auto& h = holder();
    std::lock_guard lock(h.mutex);
    if (h.threads <= 1) return nullptr;
    if (!h.pool || h.pool->size() != h.threads) h.pool = std::make_unique<ThreadPool>(h.threads);
    return h.pool.get();
}

}  // namespace

void set_num_threads(std::size_t n) {
    auto& h = holder();
    std::lock_guard lock(h.mutex);
    h.threads = std::max<std::size_t>(1, n);
}

std::size_t num_threads() {
    auto& h = holder();
    std::lock_guard lock(h.mutex);
    return h.threads;
}

std::size_t parallel_chunks(std::size_t n) {
    const std::size_t k = num_threads();
    return (k <= 1 || n < 2) ? 1 : k;
}

void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    ThreadPool* pool = current_pool();
    if (pool == nullptr || n < 2) {
        if (n > 0) fn(0, 0, n);
        return;
    }
    pool->run_chunks(n, fn);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    parallel_for_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) { fn(b, e); });
}

}  // namespace uxmc

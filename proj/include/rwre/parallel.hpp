#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rwre {

// Runs fn(i) for i in [0, count) across up to `threads` workers. Each item
// must write only into its own output slot; callers then reduce sequentially
// in index order, which keeps results independent of scheduling.
template <typename Fn>
void parallel_for(std::int64_t count, int threads, Fn&& fn) {
    if (count <= 0) return;
    if (threads < 1) threads = 1;
    threads = static_cast<int>(std::min<std::int64_t>(threads, count));
    if (threads == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::scoped_lock lk(err_mutex);
                if (!err) err = std::current_exception();
                next.store(count, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace rwre

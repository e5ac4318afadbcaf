#include "fsplat/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace fsplat {

namespace {

int resolve_threads(int num_threads) {
    if (num_threads > 0) return num_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int parallel_blocks(size_t n, int num_threads) {
    if (n == 0) return 0;
    size_t workers = std::min<size_t>(static_cast<size_t>(resolve_threads(num_threads)), n);
    size_t block = (n + workers - 1) / workers;
    return static_cast<int>((n + block - 1) / block);
}

int parallel_for_blocks(size_t n, int num_threads,
                        const std::function<void(int, size_t, size_t)>& fn) {
    if (n == 0) return 0;
    int threads = resolve_threads(num_threads);
    if (threads <= 1 || n == 1) {
        fn(0, 0, n);
        return 1;
    }
    size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
    size_t block = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    int nblocks = 0;
    for (size_t w = 0;; ++w) {
        size_t begin = w * block;
        if (begin >= n) break;
        size_t end = std::min(begin + block, n);
        pool.emplace_back([&fn, w, begin, end] { fn(static_cast<int>(w), begin, end); });
        ++nblocks;
    }
    for (auto& t : pool) t.join();
    return nblocks;
}

void parallel_for(size_t n, int num_threads, const std::function<void(size_t, size_t)>& fn) {
    parallel_for_blocks(n, num_threads, [&fn](int, size_t begin, size_t end) { fn(begin, end); });
}

}  // namespace fsplat

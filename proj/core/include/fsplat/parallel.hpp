#pragma once

#include <cstddef>
#include <functional>

namespace fsplat {

// Splits [0, n) into contiguous blocks, one per worker, and runs fn(begin, end)
// on each. Block boundaries depend only on n and num_threads, and workers never
// share output ranges, so results are identical for any thread count provided
// callers write disjoint per-index state.
void parallel_for(size_t n, int num_threads, const std::function<void(size_t, size_t)>& fn);

// Same splitting, but fn also receives the block index so callers can keep
// per-block scratch and reduce it in deterministic block order afterwards.
// Returns the number of blocks used; blocks() predicts it without running.
int parallel_for_blocks(size_t n, int num_threads,
                        const std::function<void(int, size_t, size_t)>& fn);
int parallel_blocks(size_t n, int num_threads);

}  // namespace fsplat

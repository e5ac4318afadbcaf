#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numeric>
#include <utility>
#include <vector>

#include "fsplat/errors.hpp"
#include "fsplat/image.hpp"
#include "fsplat/parallel.hpp"

namespace fsplat {
namespace {

TEST(ParallelFor, CoversTheRangeExactlyOnce) {
    for (size_t n : {0ul, 1ul, 7ul, 64ul, 1001ul}) {
        for (int threads : {1, 2, 3, 8}) {
            std::vector<std::atomic<int>> hits(n);
            for (auto& h : hits) h = 0;
            parallel_for(n, threads, [&](size_t begin, size_t end) {
                ASSERT_LE(begin, end);
                ASSERT_LE(end, n);
                for (size_t i = begin; i < end; ++i) hits[i] += 1;
            });
            for (size_t i = 0; i < n; ++i) {
                EXPECT_EQ(hits[i], 1) << "n=" << n << " threads=" << threads << " i=" << i;
            }
        }
    }
}

TEST(ParallelFor, BlockBoundariesDependOnlyOnInputs) {
    auto boundaries = [](size_t n, int threads) {
        std::vector<std::pair<size_t, size_t>> blocks;
        std::mutex mu;
        parallel_for(n, threads, [&](size_t begin, size_t end) {
            std::lock_guard<std::mutex> lock(mu);
            blocks.emplace_back(begin, end);
        });
        std::sort(blocks.begin(), blocks.end());
        return blocks;
    };
    EXPECT_EQ(boundaries(100, 4), boundaries(100, 4));
    EXPECT_EQ(boundaries(101, 3), boundaries(101, 3));
}

TEST(ParallelFor, BlockReducedSumsAreBitIdenticalAcrossThreadCounts) {
    const size_t n = 10007;
    std::vector<double> values(n);
    for (size_t i = 0; i < n; ++i) values[i] = std::sin(0.1 * i) * 1.0e-3 + 1.0 / (i + 1);

    auto block_sum = [&](int threads) {
        int nblocks = parallel_blocks(n, threads);
        std::vector<double> partial(nblocks, 0.0);
        int used = parallel_for_blocks(n, threads, [&](int block, size_t begin, size_t end) {
            double s = 0.0;
            for (size_t i = begin; i < end; ++i) s += values[i];
            partial[block] = s;
        });
        EXPECT_EQ(used, nblocks);
        double total = 0.0;
        for (double p : partial) total += p;
        return total;
    };

    // Same thread count must be exactly reproducible; the block splitting is a
    // pure function of n and num_threads.
    double four_a = block_sum(4);
    double four_b = block_sum(4);
    EXPECT_EQ(std::memcmp(&four_a, &four_b, sizeof(double)), 0);
    double one_a = block_sum(1);
    double one_b = block_sum(1);
    EXPECT_EQ(std::memcmp(&one_a, &one_b, sizeof(double)), 0);
}

TEST(ParallelFor, PredictedBlockCountMatchesTheRun) {
    for (size_t n : {0ul, 1ul, 5ul, 100ul}) {
        for (int threads : {1, 2, 4, 16}) {
            std::atomic<int> ran{0};
            int used = parallel_for_blocks(n, threads, [&](int, size_t, size_t) { ran += 1; });
            EXPECT_EQ(used, parallel_blocks(n, threads));
            EXPECT_EQ(ran.load(), used);
            if (n > 0) {
                EXPECT_GE(used, 1);
            }
            EXPECT_LE(used, std::max<int>(1, threads));
        }
    }
}

TEST(Image, LayoutIsRowMajorChannelFastest) {
    Image img(2, 3, 2);
    std::iota(img.raw().begin(), img.raw().end(), 0.0);
    EXPECT_EQ(img.at(0, 0, 0), 0.0);
    EXPECT_EQ(img.at(0, 0, 1), 1.0);
    EXPECT_EQ(img.at(0, 1, 0), 2.0);
    EXPECT_EQ(img.at(1, 0, 0), 6.0);
    EXPECT_EQ(img.at(1, 2, 1), 11.0);
    EXPECT_EQ(img.size(), 12u);
}

TEST(Image, FillAndShapeHelpers) {
    Image a(4, 5, 3, 0.25);
    for (double v : a.raw()) EXPECT_EQ(v, 0.25);
    a.fill(-1.5);
    EXPECT_EQ(a.at(3, 4, 2), -1.5);

    Image b(4, 5, 3), c(5, 4, 3);
    EXPECT_TRUE(a.same_shape(b));
    EXPECT_FALSE(a.same_shape(c));
    EXPECT_TRUE(Image().empty());
    EXPECT_FALSE(a.empty());
}

TEST(Image, MaxAbsDiffScansEveryEntry) {
    Image a(3, 3, 1, 0.0), b(3, 3, 1, 0.0);
    EXPECT_EQ(max_abs_diff(a, b), 0.0);
    b.at(2, 1, 0) = -0.75;
    EXPECT_EQ(max_abs_diff(a, b), 0.75);
    b.at(0, 0, 0) = 2.0;
    EXPECT_EQ(max_abs_diff(a, b), 2.0);
}

TEST(Errors, TypesCarryTheirPrefixes) {
    EXPECT_STREQ(ConfigError("bad knob").what(), "config error: bad knob");
    EXPECT_STREQ(DataError("bad file").what(), "data error: bad file");
    EXPECT_STREQ(NumericError("bad value").what(), "numeric error: bad value");
    EXPECT_STREQ(ContractError("bad call").what(), "contract violation: bad call");
    EXPECT_THROW(require(false, "nope"), ContractError);
    EXPECT_NO_THROW(require(true, "fine"));
}

}  // namespace
}  // namespace fsplat
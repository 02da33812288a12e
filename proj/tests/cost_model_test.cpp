#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dmt/balanced_topology.hpp"
#include "dmt/cost_model.hpp"
#include "dmt/huffman.hpp"

namespace dmt {
namespace {

LatencyTable fixed_table()
{
    LatencyTable t;
    t.set(64, 500);
    t.set(128, 700);
    t.set(256, 1100);
    t.set(2048, 7000);
    return t;
}

TEST(Amat, Examples)
{
    EXPECT_DOUBLE_EQ(amat({0, 0, 12345}), 0.0);
    EXPECT_DOUBLE_EQ(amat({1, 0.5, 10}), 6.0);
    EXPECT_DOUBLE_EQ(amat({5, 1, 100}), 105.0);
    EXPECT_THROW(amat({-1, 0, 0}), UsageError);
    EXPECT_THROW(amat({0, 1.5, 0}), UsageError);
    EXPECT_THROW(amat({0, 0.5, -2}), UsageError);
}

TEST(Amat, LinearInEachParameter)
{
    const CostParams base{3, 0.25, 40};
    EXPECT_DOUBLE_EQ(amat({6, 0.25, 40}) - amat(base), 3.0);
    EXPECT_DOUBLE_EQ(amat({3, 0.5, 40}) - amat(base), 0.25 * 40);
    EXPECT_DOUBLE_EQ(amat({3, 0.25, 80}) - amat(base), 0.25 * 40);
}

TEST(TotalWork, PerfectCacheIsBaseWorkOnly)
{
    FrequencyProfile p({10, 5, 1, 1});
    std::vector<unsigned> depths{1, 2, 3, 3};
    WorkSplit w = total_work(p, depths, {1, 0, 1000});
    EXPECT_DOUBLE_EQ(w.base_work, 10 + 10 + 3 + 3);
    EXPECT_DOUBLE_EQ(w.io_cost, 0.0);
    EXPECT_DOUBLE_EQ(w.total(), w.base_work);
}

TEST(TotalWork, DoublingMissCostDoublesIoOnly)
{
    FrequencyProfile p({10, 5, 1, 1});
    std::vector<unsigned> depths{1, 2, 3, 3};
    WorkSplit a = total_work(p, depths, {1, 0.2, 50});
    WorkSplit b = total_work(p, depths, {1, 0.2, 100});
    EXPECT_DOUBLE_EQ(b.base_work, a.base_work);
    EXPECT_DOUBLE_EQ(b.io_cost, 2 * a.io_cost);
    EXPECT_DOUBLE_EQ(a.io_cost, 0.2 * 50 * 26);
    EXPECT_THROW(total_work(p, {1, 2}, {1, 0.2, 50}), UsageError);
}

TEST(TotalWork, HuffmanNeverWorseThanBalancedUnderZipf)
{
    const std::size_t n = 1024;
    std::vector<std::uint64_t> w(n);
    for (std::size_t r = 1; r <= n; ++r) {
        w[r - 1] = static_cast<std::uint64_t>(1e9 / std::pow(double(r), 1.5)) + 1;
    }
    FrequencyProfile p(w);
    auto huff = build_huffman(p).depth_of;
    auto bal = BalancedTopology(n, TreeArity{2}).leaf_depths();
    for (double m : {0.0, 0.01, 0.1, 0.5, 1.0}) {
        CostParams c{1, m, 200};
        EXPECT_LE(total_work(p, huff, c).total(), total_work(p, bal, c).total()) << m;
    }
}

TEST(ArityCost, HeightTimesBlocksTimesHash)
{
    const auto t = fixed_table();
    EXPECT_DOUBLE_EQ(arity_cost(262144, 2, t, 32768), 8.0 * 18 * 500);
    EXPECT_DOUBLE_EQ(arity_cost(262144, 64, t, 32768), 8.0 * 3 * 7000);
    EXPECT_DOUBLE_EQ(arity_cost(262144, 4, t, 4096), 1.0 * 9 * 700);
    EXPECT_DOUBLE_EQ(arity_cost(262144, 8, t, 6000), 2.0 * 6 * 1100);
    LatencyTable empty;
    EXPECT_THROW(arity_cost(262144, 2, empty, 4096), UsageError);
    EXPECT_THROW(arity_cost(262144, 3, t, 4096), UsageError);
}

TEST(ArityCost, MeasuredTableCoversEveryArity)
{
    auto crypto = make_openssl_provider(KeyMaterial::from_seed(1));
    auto t = measure_hash_latency(*crypto, arity_input_sizes(), 2000);
    for (std::size_t s : {64u, 128u, 256u, 2048u}) {
        ASSERT_TRUE(t.contains(s));
        EXPECT_GT(t.at(s), 0.0);
    }
    EXPECT_LT(t.at(64), t.at(2048));
    EXPECT_LT(arity_cost(262144, 2, t, 32768), arity_cost(262144, 64, t, 32768));
    EXPECT_THROW(measure_hash_latency(*crypto, {64}, 0), UsageError);
}

TEST(CostCsv, HeaderAndRows)
{
    std::ostringstream out;
    write_cost_csv(out, 262144, fixed_table(), 32768);
    EXPECT_EQ(out.str(),
              "k,height,input_bytes,hash_ns,expected_ns_per_io\n"
              "2,18,64,500,72000\n"
              "4,9,128,700,50400\n"
              "8,6,256,1100,52800\n"
              "64,3,2048,7000,168000\n");
}

} // namespace
} // namespace dmt

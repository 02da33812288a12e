#include <gtest/gtest.h>

#include <map>
#include <random>

#include "dmt/balanced_topology.hpp"
#include "dmt/dmt_topology.hpp"
#include "dmt/engine.hpp"
#include "dmt/huffman.hpp"
#include "temp_dir.hpp"

namespace dmt {
namespace {

const KeyMaterial kKeys = KeyMaterial::from_seed(99);

std::unique_ptr<Engine> make_balanced(const test::TempDir& dir, std::uint64_t n, unsigned k = 2,
                                      double ratio = 0.1, bool tamper = false)
{
    auto cfg = dir.engine_config(n, ratio);
    cfg.tamper_mode = tamper;
    return Engine::initialize(cfg, std::make_unique<BalancedTopology>(n, TreeArity{k}),
                              make_openssl_provider(kKeys), false);
}

std::unique_ptr<Engine> make_dmt(const test::TempDir& dir, std::uint64_t n, double p,
                                 double ratio = 0.1, bool tamper = false)
{
    auto cfg = dir.engine_config(n, ratio);
    cfg.tamper_mode = tamper;
    return Engine::initialize(cfg, std::make_unique<DmtTopology>(n, SplayPolicy{true, p, 3}),
                              make_openssl_provider(kKeys), false);
}

std::vector<std::uint8_t> pattern(std::uint32_t seed, std::size_t size = 4096)
{
    std::vector<std::uint8_t> v(size);
    std::mt19937 rng(seed);
    for (auto& b : v) {
        b = static_cast<std::uint8_t>(rng());
    }
    return v;
}

TEST(Engine, ColdReadHashesOnePerLevel)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 1024);
    e->write_authenticated(BlockId{5}, pattern(1));
    e->clear_cache();
    e->reset_counters();
    e->read_verified(BlockId{5});
    auto c = e->counters();
    EXPECT_EQ(c.auth_hashes, 10u);
    EXPECT_EQ(c.node_hashes_computed, 10u);
    EXPECT_EQ(c.block_opens, 1u);
    EXPECT_EQ(c.data_reads, 1u);
}

TEST(Engine, WarmReadExitsEarly)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 1024, 2, 0.5);
    e->write_authenticated(BlockId{5}, pattern(1));
    e->clear_cache();
    e->read_verified(BlockId{4}); // sibling leaf: caches the shared path
    e->reset_counters();
    e->read_verified(BlockId{5});
    EXPECT_EQ(e->counters().auth_hashes, 0u);

    e->read_verified(BlockId{6}); // parent of 6 is uncached, grandparent is
    EXPECT_EQ(e->counters().auth_hashes, 1u);
}

TEST(Engine, WriteHashesFullHeightRegardlessOfCache)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 1024, 4, 1.0);
    for (int round = 0; round < 3; ++round) {
        e->reset_counters();
        e->write_authenticated(BlockId{100}, pattern(round));
        EXPECT_EQ(e->counters().update_hashes, 5u);
        EXPECT_EQ(e->counters().block_seals, 1u);
    }
}

TEST(Engine, WriteReadRoundTripAndZeros)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 64, 8);
    auto data = pattern(7);
    auto g = e->write_authenticated(BlockId{63}, data);
    EXPECT_EQ(g, 1u);
    EXPECT_EQ(e->read_verified(BlockId{63}), data);
    EXPECT_EQ(e->read_verified(BlockId{0}), std::vector<std::uint8_t>(4096, 0));
    EXPECT_THROW(e->read_verified(BlockId{64}), RangeError);
    EXPECT_THROW(e->write_authenticated(BlockId{0}, std::vector<std::uint8_t>(10)), UsageError);
}

TEST(Engine, IdenticalWritesGiveDifferentAnchors)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 64);
    auto data = pattern(1);
    e->write_authenticated(BlockId{3}, data);
    auto a = e->anchor();
    e->write_authenticated(BlockId{3}, data);
    auto b = e->anchor();
    EXPECT_NE(a.digest, b.digest);
    EXPECT_EQ(b.generation, a.generation + 1);
}

TEST(Engine, ReopenBalanced)
{
    test::TempDir dir;
    auto data = pattern(3);
    RootAnchor before;
    {
        auto e = make_balanced(dir, 256, 4);
        e->write_authenticated(BlockId{200}, data);
        e->flush();
        before = e->anchor();
    }
    auto e = Engine::open(dir.engine_config(256), std::make_unique<BalancedTopology>(256, TreeArity{4}),
                          make_openssl_provider(kKeys));
    EXPECT_EQ(e->anchor(), before);
    EXPECT_EQ(e->read_verified(BlockId{200}), data);
}

TEST(Engine, ReopenDmtAfterSplays)
{
    test::TempDir dir;
    std::map<std::uint64_t, std::vector<std::uint8_t>> shadow;
    std::vector<unsigned> depths;
    {
        auto e = make_dmt(dir, 512, 0.5);
        std::mt19937_64 rng(4);
        for (int i = 0; i < 500; ++i) {
            std::uint64_t b = rng() % 512;
            if (rng() % 2) {
                shadow[b] = pattern(static_cast<std::uint32_t>(i));
                e->write_authenticated(BlockId{b}, shadow[b]);
            } else {
                e->read_verified(BlockId{b});
            }
        }
        EXPECT_GT(e->counters().splays_performed, 0u);
        e->flush();
        depths = e->topology().leaf_depths();
    }
    auto e = Engine::open(dir.engine_config(512),
                          std::make_unique<DmtTopology>(512, SplayPolicy{true, 0.5, 3}),
                          make_openssl_provider(kKeys));
    EXPECT_EQ(e->topology().leaf_depths(), depths);
    for (const auto& [b, data] : shadow) {
        ASSERT_EQ(e->read_verified(BlockId{b}), data);
    }
}

TEST(Engine, ReopenRejectsTamperedPointers)
{
    test::TempDir dir;
    {
        auto e = make_dmt(dir, 64, 0.0, 0.1, true);
        e->write_authenticated(BlockId{1}, pattern(1));
        e->flush();
        // Swap the root's children: still a valid shape, wrong digests.
        NodeRecord root = e->store().read_node(NodeId{0});
        std::swap(root.left, root.right);
        e->store().write_node(NodeId{0}, root);
    }
    EXPECT_THROW(Engine::open(dir.engine_config(64),
                              std::make_unique<DmtTopology>(64, SplayPolicy{}),
                              make_openssl_provider(kKeys)),
                 IntegrityError);
}

TEST(Engine, TamperedDataIsDetectedAndRestoreHeals)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 64, 2, 0.1, true);
    e->write_authenticated(BlockId{9}, pattern(9));
    e->clear_cache();
    e->store().tamper(Region::data, 9 * 4096 + 100, FlipBit{0});
    try {
        e->read_verified(BlockId{9});
        FAIL() << "tampered block was accepted";
    } catch (const IntegrityError& err) {
        EXPECT_EQ(err.report().block, BlockId{9});
        EXPECT_EQ(err.report().level, 0u);
        EXPECT_NE(std::string(err.what()).find("MAC"), std::string::npos);
    }
    e->store().tamper(Region::data, 9 * 4096 + 100, FlipBit{0});
    EXPECT_EQ(e->read_verified(BlockId{9}), pattern(9));
}

TEST(Engine, TamperedInternalDigestIsDetected)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 64, 2, 0.1, true);
    e->write_authenticated(BlockId{9}, pattern(9));
    e->clear_cache();
    NodeId victim = e->topology().parent(e->topology().parent(e->topology().leaf_of(BlockId{9})));
    e->store().tamper(Region::meta, UntrustedStore::node_offset(victim) + 40, FlipBit{2});
    EXPECT_THROW(e->read_verified(BlockId{9}), IntegrityError);
    EXPECT_EQ(e->inconsistent_nodes(), std::vector<NodeId>{victim});
    EXPECT_EQ(e->recompute_root_full(), Digest{});
}

TEST(Engine, StaleSnapshotIsDetected)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 64, 2, 0.1, true);
    const BlockId b{17};
    e->write_authenticated(b, pattern(1));
    e->clear_cache();
    std::vector<std::pair<NodeId, std::vector<std::uint8_t>>> snap;
    for (NodeId n = e->topology().leaf_of(b); n != kNoNode; n = e->topology().parent(n)) {
        snap.emplace_back(n, e->store().record(Region::meta, UntrustedStore::node_offset(n),
                                               NodeRecord::kSize));
    }
    auto old_block = e->store().record(Region::data, b.value * 4096, 4096);
    e->write_authenticated(b, pattern(2));
    e->clear_cache();
    for (const auto& [n, bytes] : snap) {
        e->store().tamper(Region::meta, UntrustedStore::node_offset(n), RestoreSnapshot{bytes});
    }
    e->store().tamper(Region::data, b.value * 4096, RestoreSnapshot{old_block});
    EXPECT_THROW(e->read_verified(b), IntegrityError);
}

TEST(Engine, PartialWritesReadModifyWrite)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 16);
    auto base = pattern(5, 2 * 4096);
    e->io({0, OpKind::write, 4096, 8192}, base);
    std::vector<std::uint8_t> patch(4096, 0xee);
    e->reset_counters();
    IoResult r = e->io({0, OpKind::write, 4096 + 2048, 4096}, patch);
    EXPECT_EQ(r.blocks, 2u);
    EXPECT_EQ(e->counters().block_opens, 2u);
    EXPECT_EQ(e->counters().block_seals, 2u);

    std::vector<std::uint8_t> back(8192);
    e->io({0, OpKind::read, 4096, 8192}, back);
    auto expect = base;
    std::fill(expect.begin() + 2048, expect.begin() + 2048 + 4096, 0xee);
    EXPECT_EQ(back, expect);

    EXPECT_EQ(e->io({0, OpKind::read, 0, 0}).blocks, 0u);
    EXPECT_THROW(e->io({0, OpKind::read, 15 * 4096, 8192}), RangeError);
    EXPECT_THROW(e->io({0, OpKind::read, 0, 4096}, back), UsageError);
}

TEST(Engine, ThirtyTwoKilobyteWriteIsEightUpdates)
{
    test::TempDir dir;
    auto e = make_balanced(dir, 1024);
    IoResult r = e->io({0, OpKind::write, 8 * 4096, 32768});
    EXPECT_EQ(r.blocks, 8u);
    EXPECT_EQ(r.update_hashes, 8u * 10);
    EXPECT_EQ(e->counters().block_seals, 8u);
    EXPECT_EQ(e->anchor().generation, 8u);
}

TEST(Engine, CountersReconcile)
{
    test::TempDir dir;
    auto e = make_dmt(dir, 256, 0.2);
    std::mt19937_64 rng(8);
    std::uint64_t hashes = 0;
    for (int i = 0; i < 300; ++i) {
        WorkloadOp op{0, rng() % 2 ? OpKind::read : OpKind::write, (rng() % 256) * 4096, 4096};
        hashes += e->io(op).hashes;
    }
    auto c = e->counters();
    EXPECT_EQ(c.node_hashes_computed, hashes);
    EXPECT_EQ(c.node_hashes_computed, c.auth_hashes + c.update_hashes + c.splay_hashes);
    EXPECT_EQ(c.splays_performed, dynamic_cast<const DmtTopology&>(e->topology()).stats().splays);
}

TEST(Engine, FlushedStateMatchesFullRecomputation)
{
    test::TempDir dir;
    auto e = make_dmt(dir, 128, 0.5);
    EXPECT_EQ(e->recompute_root_full(), e->anchor().digest);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 400; ++i) {
        BlockId b{rng() % 128};
        if (rng() % 2) {
            e->write_authenticated(b, pattern(i));
        } else {
            e->read_verified(b);
        }
        if (i % 50 == 0) {
            e->flush();
            ASSERT_EQ(e->recompute_root_full(), e->anchor().digest);
        }
    }
    e->flush();
    EXPECT_EQ(e->recompute_root_full(), e->anchor().digest);
    EXPECT_TRUE(e->inconsistent_nodes().empty());
}

TEST(Engine, SplayOnReadAdvancesGeneration)
{
    test::TempDir dir;
    auto e = make_dmt(dir, 64, 1.0, 1.0);
    e->read_verified(BlockId{40});
    auto g = e->anchor().generation;
    e->read_verified(BlockId{40});
    EXPECT_EQ(e->anchor().generation, g + 1);
}

TEST(Engine, WarmAndColdVerifyAgree)
{
    test::TempDir dir;
    auto e = make_dmt(dir, 128, 0.3, 0.5);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        e->write_authenticated(BlockId{rng() % 128}, pattern(i));
    }
    for (std::uint64_t b = 0; b < 128; ++b) {
        auto warm = e->read_verified(BlockId{b});
        e->clear_cache();
        ASSERT_EQ(e->read_verified(BlockId{b}), warm);
    }
}

TEST(Engine, HuffmanTopologyEngine)
{
    test::TempDir dir;
    FrequencyProfile p(std::vector<std::uint64_t>(32, 1));
    p.add(BlockId{7}, 1000);
    auto e = Engine::initialize(dir.engine_config(32),
                                std::make_unique<HuffmanTopology>(build_huffman(p)),
                                make_openssl_provider(kKeys), false);
    EXPECT_EQ(e->topology().depth(e->topology().leaf_of(BlockId{7})), 1u);
    e->reset_counters();
    e->write_authenticated(BlockId{7}, pattern(1));
    EXPECT_EQ(e->counters().update_hashes, 1u);
}

TEST(Engine, InitializeRefusesExistingImage)
{
    test::TempDir dir;
    make_balanced(dir, 16);
    EXPECT_THROW(make_balanced(dir, 16), UsageError);
    auto cfg = dir.engine_config(16);
    cfg.anchor_path = cfg.layout.data_path;
    EXPECT_THROW(Engine::initialize(cfg, std::make_unique<BalancedTopology>(16, TreeArity{2}),
                                    make_openssl_provider(kKeys), true),
                 UsageError);
}

TEST(AnchorFile, RoundTripAndSize)
{
    test::TempDir dir;
    RootAnchor a;
    a.digest.fill(0x5a);
    a.generation = 0x0102030405060708ULL;
    AnchorFile::save(dir / "anchor", a);
    EXPECT_EQ(std::filesystem::file_size(dir / "anchor"), 40u);
    EXPECT_EQ(AnchorFile::load(dir / "anchor"), a);
    EXPECT_THROW(AnchorFile::load(dir / "missing"), IoError);
}

} // namespace
} // namespace dmt

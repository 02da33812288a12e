// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dmt/balanced_topology.hpp"
#include "dmt/cost_model.hpp"
#include "dmt/dmt_topology.hpp"
#include "dmt/engine.hpp"
#include "dmt/huffman.hpp"
#include "dmt/runner.hpp"
#include "temp_dir.hpp"

using namespace dmt;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const KeyMaterial kKeys = KeyMaterial::from_seed(2024);

// Shared by the workload criteria.
constexpr std::uint64_t kSkewBlocks = 1 << 16;
constexpr double kVirtualRate = 5000;

std::vector<std::uint8_t> random_block(std::mt19937_64& rng, std::size_t size = 4096)
{
    std::vector<std::uint8_t> v(size);
    for (std::size_t i = 0; i < size; i += 8) {
        std::uint64_t x = rng();
        for (std::size_t j = 0; j < 8 && i + j < size; ++j) {
            v[i + j] = static_cast<std::uint8_t>(x >> (8 * j));
        }
    }
    return v;
}

std::string fmt(double v, int precision = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

// 1. Randomized reads and writes with splays; the flushed image always
// reproduces the anchor.
Outcome root_consistency()
{
    const std::uint64_t n = 1024;
    int consistent = 0;
    std::uint64_t splays = 0;
    bool contents_ok = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        test::TempDir dir("acc1");
        auto e = Engine::initialize(dir.engine_config(n, 0.1),
                                    std::make_unique<DmtTopology>(n, SplayPolicy{true, 0.5, seed}),
                                    make_openssl_provider(kKeys), false);
        std::mt19937_64 rng(seed);
        std::map<std::uint64_t, std::vector<std::uint8_t>> shadow;
        for (int i = 0; i < 10000; ++i) {
            BlockId b{rng() % n};
            if (rng() % 2 == 0) {
                auto data = random_block(rng);
                e->write_authenticated(b, data);
                shadow[b.value] = std::move(data);
            } else {
                auto got = e->read_verified(b);
                auto it = shadow.find(b.value);
                if (it == shadow.end() ? got != std::vector<std::uint8_t>(4096, 0)
                                       : got != it->second) {
                    contents_ok = false;
                }
            }
        }
        e->flush();
        consistent += e->recompute_root_full() == e->anchor().digest;
        splays += e->counters().splays_performed;
    }
    return {consistent == 20 && contents_ok,
            std::to_string(consistent) + "/20 seeds consistent, reads " +
                (contents_ok ? "matched" : "DIVERGED") + ", " + std::to_string(splays) +
                " splays"};
}

// 2. Single-bit flips in the data file and in the metadata bytes that
// verifying the block depends on.
Outcome tamper_detection()
{
    const std::uint64_t n = 1024;
    test::TempDir dir("acc2");
    auto cfg = dir.engine_config(n, 0.1);
    cfg.tamper_mode = true;
    auto e = Engine::initialize(cfg, std::make_unique<DmtTopology>(n, SplayPolicy{true, 0.5, 7}),
                                make_openssl_provider(kKeys), false);
    std::mt19937_64 rng(2);
    for (std::uint64_t b = 0; b < n; ++b) {
        e->write_authenticated(BlockId{b}, random_block(rng));
    }
    e->clear_cache();
    int detected = 0;
    int data_trials = 0, meta_trials = 0;
    for (int trial = 0; trial < 200; ++trial) {
        BlockId b{rng() % n};
        Region region;
        std::uint64_t offset;
        if (trial % 2 == 0) {
            region = Region::data;
            offset = b.value * 4096 + rng() % 4096;
            ++data_trials;
        } else {
            region = Region::meta;
            const Topology& t = e->topology();
            std::vector<NodeId> used;
            for (NodeId x = t.leaf_of(b); t.parent(x) != kNoNode; x = t.parent(x)) {
                for (NodeId c : t.children(t.parent(x))) {
                    used.push_back(c); // path node and its siblings
                }
            }
            // The iv field only matters on the block's own leaf.
            NodeId victim = used[rng() % used.size()];
            const unsigned span = victim == t.leaf_of(b) ? 44 : 32;
            offset = UntrustedStore::node_offset(victim) + 32 + rng() % span;
            ++meta_trials;
        }
        FlipBit flip{static_cast<unsigned>(rng() % 8)};
        e->store().tamper(region, offset, flip);
        try {
            e->read_verified(b);
        } catch (const IntegrityError&) {
            ++detected;
        }
        e->store().tamper(region, offset, flip);
        e->clear_cache();
    }
    return {detected == 200, std::to_string(detected) + "/200 detected (" +
                                 std::to_string(data_trials) + " data, " +
                                 std::to_string(meta_trials) + " metadata)"};
}

// 3. Replay of a stale but self-consistent block and path after a newer
// committed write.
Outcome freshness()
{
    const std::uint64_t n = 1024;
    test::TempDir dir("acc3");
    auto cfg = dir.engine_config(n, 0.1);
    cfg.tamper_mode = true;
    auto e = Engine::initialize(cfg, std::make_unique<BalancedTopology>(n, TreeArity{2}),
                                make_openssl_provider(kKeys), false);
    std::mt19937_64 rng(3);
    auto& s = e->store();
    auto snapshot = [&](BlockId b) {
        std::vector<std::pair<std::uint64_t, std::vector<std::uint8_t>>> meta;
        for (NodeId x = e->topology().leaf_of(b); x != kNoNode; x = e->topology().parent(x)) {
            auto off = UntrustedStore::node_offset(x);
            meta.emplace_back(off, s.record(Region::meta, off, NodeRecord::kSize));
        }
        auto data = s.record(Region::data, b.value * 4096, 4096);
        return std::make_pair(meta, data);
    };
    auto restore = [&](BlockId b, const auto& snap) {
        for (const auto& [off, bytes] : snap.first) {
            s.tamper(Region::meta, off, RestoreSnapshot{bytes});
        }
        s.tamper(Region::data, b.value * 4096, RestoreSnapshot{snap.second});
    };
    int detected = 0;
    for (int trial = 0; trial < 50; ++trial) {
        BlockId b{rng() % n};
        e->write_authenticated(b, random_block(rng));
        e->clear_cache();
        auto stale = snapshot(b);
        e->write_authenticated(b, random_block(rng));
        e->clear_cache();
        auto fresh = snapshot(b);
        restore(b, stale);
        try {
            e->read_verified(b);
        } catch (const IntegrityError&) {
            ++detected;
        }
        restore(b, fresh);
        e->clear_cache();
    }
    e->flush();
    const bool intact = e->recompute_root_full() == e->anchor().digest;
    return {detected == 50 && intact,
            std::to_string(detected) + "/50 replays detected" +
                (intact ? "" : ", image not restored")};
}

// 4. Huffman trees are optimal against exhaustive search.
Outcome huffman_optimality()
{
    std::mt19937_64 rng(4);
    int agree = 0, total = 0;
    for (std::size_t n = 2; n <= 8; ++n) {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::uint64_t> w(n);
            for (auto& x : w) {
                x = 1 + rng() % 10000;
            }
            FrequencyProfile p(w);
            agree += weighted_depth(build_huffman(p).depth_of, p) == brute_force_optimal(p).cost;
            ++total;
        }
    }
    return {agree == total, std::to_string(agree) + "/" + std::to_string(total) +
                                " profiles match the exhaustive optimum"};
}

// 5. Height-18 arithmetic on a 1 GiB device.
Outcome height_arithmetic()
{
    const std::uint64_t n = 262144;
    test::TempDir dir("acc5");
    auto e = Engine::initialize(dir.engine_config(n, 0.1),
                                std::make_unique<BalancedTopology>(n, TreeArity{2}),
                                make_openssl_provider(kKeys), false);
    std::mt19937_64 rng(5);
    bool exact = true;
    for (int i = 0; i < 20; ++i) {
        e->clear_cache();
        e->reset_counters();
        e->write_authenticated(BlockId{rng() % n}, random_block(rng));
        auto c = e->counters();
        exact = exact && c.update_hashes == 18 && c.block_seals == 1;
    }
    e->clear_cache();
    e->reset_counters();
    IoResult r = e->io({0, OpKind::write, (rng() % (n / 8)) * 32768, 32768});
    auto c = e->counters();
    const bool eight = r.blocks == 8 && c.block_seals == 8 && c.data_writes == 8 &&
                       c.update_hashes == 8 * 18;
    return {exact && eight, std::string("cold update hashes per block ") +
                                (exact ? "= 18" : "!= 18") + "; 32 KB write = " +
                                std::to_string(c.block_seals) + " block updates, " +
                                std::to_string(c.update_hashes) + " update hashes"};
}

RunConfig skew_config(const test::TempDir& dir, const std::string& tree,
                      const std::string& workload)
{
    RunConfig c = dir.run_config();
    c.capacity_bytes = kSkewBlocks * 4096;
    c.cache_ratio = 0.1;
    c.read_ratio = 0.01;
    c.io_size = 32768;
    c.workload = workload;
    c.tree = TreeSpec::parse(tree == "huffman" ? "dmt" : tree);
    if (tree == "huffman") {
        c.tree.kind = TreeSpec::Kind::huffman;
    }
    c.duration_s = 60;
    c.warmup_s = 10;
    c.virtual_rate = kVirtualRate;
    c.seed = 42;
    return c;
}

RunReport run_tree(RunConfig c)
{
    test::TempDir dir("accrun");
    c.data_path = dir / "img" / "data";
    c.meta_path = dir / "img" / "meta";
    c.anchor_path = dir / "img" / "anchor";
    std::unique_ptr<Engine> e;
    if (c.tree.kind == TreeSpec::Kind::huffman) {
        // The oracle sees the whole op stream it will be measured on.
        auto profile = trace_to_profile(generate_ops(c), c.block_size, c.n_blocks());
        e = init_engine(c, kKeys, false, &profile);
    } else {
        e = init_engine(c, kKeys, false);
    }
    return run_workload(*e, c);
}

struct SkewRuns {
    RunReport balanced, huffman, dmt;
};

// 6. Mean hashes per write under Zipf(2.5).
Outcome skew_benefit(SkewRuns& runs)
{
    test::TempDir dir("acc6");
    runs.balanced = run_tree(skew_config(dir, "balanced:2", "zipf:2.5"));
    runs.huffman = run_tree(skew_config(dir, "huffman", "zipf:2.5"));
    runs.dmt = run_tree(skew_config(dir, "dmt", "zipf:2.5"));
    const double b = runs.balanced.mean_hashes_per_write();
    const double h = runs.huffman.mean_hashes_per_write();
    const double d = runs.dmt.mean_hashes_per_write();
    const bool order = h <= d && d <= 0.7 * b;
    const bool near_opt = d <= 1.35 * h;
    return {order && near_opt,
            "hashes/write huffman " + fmt(h) + ", dmt " + fmt(d) + ", balanced " + fmt(b) +
                "; huffman<=dmt<=0.7*balanced " + (order ? "holds" : "violated") +
                "; dmt/huffman = " + fmt(d / h) + " (limit 1.35)"};
}

// 7. Mean hashes per op under a uniform workload.
Outcome uniform_overhead()
{
    test::TempDir dir("acc7");
    auto b = run_tree(skew_config(dir, "balanced:2", "uniform"));
    auto d = run_tree(skew_config(dir, "dmt", "uniform"));
    const double ratio = d.mean_hashes_per_op() / b.mean_hashes_per_op();
    return {ratio <= 1.15, "hashes/op dmt " + fmt(d.mean_hashes_per_op()) + ", balanced " +
                               fmt(b.mean_hashes_per_op()) + ", ratio " + fmt(ratio, 3) +
                               " (limit 1.15)"};
}

// 8. Per-second hashes/op settles within 5 s of every Zipf phase start.
Outcome adaptation()
{
    test::TempDir dir("acc8");
    const std::string phases = "zipf:2.5@30,uniform@30,zipf:2.0@30,uniform@30,zipf:3.0@30";
    RunConfig c = skew_config(dir, "dmt", phases);
    c.warmup_s = 0;
    c.duration_s = 150;
    RunReport r = run_tree(c);
    std::map<std::uint64_t, double> per_second;
    for (const auto& s : r.samples) {
        per_second[s.second] = s.mean_hashes_per_op();
    }
    bool all = true;
    std::string detail;
    for (std::uint64_t start : {0u, 60u, 120u}) {
        const std::uint64_t end = start + 30;
        double steady = 0;
        for (std::uint64_t s = end - 5; s < end; ++s) {
            steady += per_second[s];
        }
        steady /= 5;
        std::optional<std::uint64_t> settled;
        for (std::uint64_t s = start; s < start + 5; ++s) {
            if (std::abs(per_second[s] - steady) <= 0.2 * steady) {
                settled = s - start;
                break;
            }
        }
        all = all && settled.has_value();
        detail += (detail.empty() ? "" : "; ") + std::string("phase@") + std::to_string(start) +
                  "s steady " + fmt(steady, 1) + " settled " +
                  (settled ? "after " + std::to_string(*settled) + " s" : "NOT within 5 s");
    }
    return {all, detail};
}

// 9. Arity cost ordering with measured hash latency, plus the AMAT identities.
Outcome cost_model()
{
    auto crypto = make_openssl_provider(kKeys);
    LatencyTable t = measure_hash_latency(*crypto, arity_input_sizes(), 20000);
    const double k2 = arity_cost(262144, 2, t, 32768);
    const double k64 = arity_cost(262144, 64, t, 32768);
    bool identities = k2 == 8.0 * 18 * t.at(64) && k64 == 8.0 * 3 * t.at(2048) &&
                      amat({0, 0, 1e6}) == 0 && amat({1, 0.5, 10}) == 6 &&
                      amat({5, 1, 100}) == 105;
    FrequencyProfile p({40, 30, 20, 10});
    std::vector<unsigned> depths{1, 2, 3, 3};
    WorkSplit perfect = total_work(p, depths, {1, 0, 500});
    WorkSplit a = total_work(p, depths, {1, 0.3, 500});
    WorkSplit b = total_work(p, depths, {1, 0.3, 1000});
    identities = identities && perfect.io_cost == 0 && perfect.total() == 190 &&
                 b.base_work == a.base_work && b.io_cost == 2 * a.io_cost;
    return {k2 < k64 && identities,
            "k=2 " + fmt(k2 / 1000, 1) + " us/IO, k=64 " + fmt(k64 / 1000, 1) +
                " us/IO; identities " + (identities ? "exact" : "VIOLATED")};
}

// 10. Cache size sensitivity.
Outcome cache_sensitivity(const SkewRuns& runs)
{
    test::TempDir dir("acc10");
    auto small = skew_config(dir, "dmt", "zipf:2.5");
    small.cache_ratio = 0.001;
    auto mid = skew_config(dir, "dmt", "zipf:2.5");
    mid.cache_ratio = 0.01;
    auto bal = skew_config(dir, "balanced:2", "zipf:2.5");
    bal.cache_ratio = 0.01;
    RunReport d_small = run_tree(small);
    RunReport d_mid = run_tree(mid);
    RunReport b_mid = run_tree(bal);
    const double hit = runs.dmt.cache_hit_rate();
    const bool ok = hit > 0.99 && d_small.mean_hashes_per_op() <= b_mid.mean_hashes_per_op();
    return {ok, "hit rate at 10% " + fmt(hit * 100, 3) + "%; dmt hashes/op at 0.1%/1%/10% " +
                    fmt(d_small.mean_hashes_per_op()) + "/" + fmt(d_mid.mean_hashes_per_op()) +
                    "/" + fmt(runs.dmt.mean_hashes_per_op()) + ", balanced at 1% " +
                    fmt(b_mid.mean_hashes_per_op())};
}

// 11. Same config and seeds, same counters and anchor.
Outcome determinism()
{
    test::TempDir dir("acc11");
    RunConfig c = skew_config(dir, "dmt", "zipf:2.5");
    c.capacity_bytes = 4096ULL * 4096;
    c.splay_p = 0.05;
    c.duration_s = 10;
    c.warmup_s = 2;
    c.virtual_rate = 2000;
    RunReport a = run_tree(c);
    RunReport b = run_tree(c);
    const bool same = a.counters == b.counters && a.final_anchor == b.final_anchor;
    return {same, std::string(same ? "identical" : "DIFFERENT") + " counters and anchor over " +
                      std::to_string(a.ops) + " ops (root " +
                      to_hex(a.final_anchor.digest).substr(0, 16) + ", generation " +
                      std::to_string(a.final_anchor.generation) + ")"};
}

} // namespace

int main()
{
    SkewRuns runs;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"root consistency under randomized ops", root_consistency},
        {"single-bit tamper detection", tamper_detection},
        {"stale snapshot replay detection", freshness},
        {"huffman equals exhaustive optimum", huffman_optimality},
        {"height-18 update arithmetic", height_arithmetic},
        {"skewed workload hashes per write", [&] { return skew_benefit(runs); }},
        {"uniform workload overhead", uniform_overhead},
        {"adaptation after phase changes", adaptation},
        {"arity cost model", cost_model},
        {"cache size sensitivity", [&] { return cache_sensitivity(runs); }},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first
                  << ": " << o.detail << " (" << fmt(secs, 1) << " s)" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dmt/crypto.hpp"
#include "dmt/secure_cache.hpp"
#include "dmt/store.hpp"
#include "dmt/topology.hpp"
#include "dmt/types.hpp"

namespace dmt {

struct OpCounters {
    std::uint64_t node_hashes_computed = 0;
    std::uint64_t bytes_hashed = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t meta_reads = 0;
    std::uint64_t meta_writes = 0;
    std::uint64_t data_reads = 0;
    std::uint64_t data_writes = 0;
    std::uint64_t splays_performed = 0;
    std::uint64_t rotations_performed = 0;
    // Breakdown of node_hashes_computed.
    std::uint64_t auth_hashes = 0;   // verifying fetched nodes
    std::uint64_t update_hashes = 0; // recomputing ancestors after a write
    std::uint64_t splay_hashes = 0;  // recomputing after rotations
    std::uint64_t block_seals = 0;
    std::uint64_t block_opens = 0;

    OpCounters operator-(const OpCounters& rhs) const;
    friend bool operator==(const OpCounters&, const OpCounters&) = default;

    /// (name, value) pairs in a fixed order, for reports.
    std::vector<std::pair<const char*, std::uint64_t>> fields() const;
};

struct IoResult {
    std::uint64_t latency_ns = 0;
    std::uint64_t blocks = 0;
    std::uint64_t hashes = 0;        // every node hash computed during the op
    std::uint64_t update_hashes = 0; // the ancestor-update share of `hashes`
};

/// The trusted root location: 32-byte digest followed by the generation as
/// a little-endian u64.
struct AnchorFile {
    static constexpr std::size_t kSize = 40;
    static RootAnchor load(const std::filesystem::path& path);
    static void save(const std::filesystem::path& path, const RootAnchor& anchor);
};

struct EngineConfig {
    /// n_blocks, block_size and the two paths. max_nodes comes from the topology.
    StoreLayout layout;
    std::filesystem::path anchor_path;
    double cache_ratio = 0.1;
    std::uint64_t iv_seed = 1;
    std::chrono::microseconds device_latency{0};
    bool tamper_mode = false;
};

/// Authenticated block device over an untrusted store. Every public method
/// takes one global lock.
class Engine : private SplayHost {
public:
    /// Creates zeroed images, computes every digest and writes the anchor
    /// with generation 0.
    static std::unique_ptr<Engine> initialize(EngineConfig config, std::unique_ptr<Topology> topo,
                                              std::unique_ptr<CryptoProvider> crypto, bool force);

    /// Opens an existing image. Pointer trees are rebuilt from metadata and
    /// checked against the anchor before use.
    static std::unique_ptr<Engine> open(EngineConfig config, std::unique_ptr<Topology> topo,
                                        std::unique_ptr<CryptoProvider> crypto);

    ~Engine() override;
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Throws IntegrityError when the block or its path does not verify.
    std::vector<std::uint8_t> read_verified(BlockId block);
    /// Returns the new anchor generation.
    std::uint64_t write_authenticated(BlockId block, std::span<const std::uint8_t> plaintext);

    /// Runs one request under a single lock acquisition. Reads copy into
    /// `buffer` and writes take their bytes from it when it is non-empty;
    /// otherwise writes use a filler pattern. Partial blocks are
    /// read-modify-written.
    IoResult io(const WorkloadOp& op, std::span<std::uint8_t> buffer = {});

    /// Writes dirty nodes and the root record, then the anchor file.
    /// Returns the number of records written.
    std::size_t flush();
    /// Flushes, then forgets every cached node.
    void clear_cache();

    /// Bottom-up recomputation from the on-disk leaves. Returns an all-zero
    /// digest if any stored internal digest disagrees. Call after flush().
    Digest recompute_root_full();
    /// Nodes whose stored digest disagrees with the recomputation.
    std::vector<NodeId> inconsistent_nodes();

    RootAnchor anchor() const;
    OpCounters counters() const;
    void reset_counters();

    const Topology& topology() const { return *topo_; }
    const SecureCache& cache() const { return cache_; }
    /// Direct access to the untrusted image, for tamper tests.
    UntrustedStore& store() { return store_; }

    std::uint32_t block_size() const { return store_.layout().block_size; }
    std::uint64_t n_blocks() const { return store_.layout().n_blocks; }
    std::uint64_t capacity_bytes() const { return store_.layout().capacity_bytes(); }

private:
    Engine(EngineConfig config, UntrustedStore store, std::unique_ptr<Topology> topo,
           std::unique_ptr<CryptoProvider> crypto, RootAnchor anchor);

    // SplayHost
    bool cached(NodeId node) override;
    std::int64_t hotness(NodeId node) override;
    void adjust_hotness(NodeId node, std::int64_t delta) override;
    void authenticate_path(NodeId leaf) override;
    void rehash(NodeId node) override;
    void commit_restructure(std::span<const NodeId> touched, unsigned rotations) override;

    std::vector<std::uint8_t> read_locked(BlockId block);
    std::uint64_t write_locked(BlockId block, std::span<const std::uint8_t> plaintext);
    std::size_t flush_locked();

    void begin_op(BlockId block);
    std::optional<Digest> lookup_trusted(NodeId node);
    const NodeRecord& fetch(NodeId node);
    Digest hash_node(std::span<const Digest> kids, std::uint64_t& bucket);
    void verify_chain(NodeId start, const Digest& start_digest, const Iv* start_iv);
    void ensure_siblings(NodeId leaf);
    void update_path(NodeId leaf, const Digest& leaf_digest, const Iv& iv);
    [[noreturn]] void fail(NodeId node, unsigned level, const Digest& expected,
                           const Digest& computed, std::string what);

    NodeRecord make_record(NodeId node, const Digest& digest, const Iv& iv,
                           std::int64_t hotness) const;
    void write_back(const CacheEntry& entry);
    void absorb(std::optional<CacheEntry> victim);
    Iv next_iv();
    std::vector<Digest> recompute_all(std::vector<NodeId>* bad);

    EngineConfig config_;
    UntrustedStore store_;
    std::unique_ptr<Topology> topo_;
    std::unique_ptr<CryptoProvider> crypto_;
    SecureCache cache_;
    RootAnchor anchor_;
    bool root_dirty_ = false;
    std::mt19937_64 iv_rng_;

    OpCounters counters_;
    OpCounters baseline_;

    // Scratch state for one block operation.
    BlockId op_block_{};
    std::unordered_map<NodeId, Digest> local_;
    std::unordered_map<NodeId, NodeRecord> fetched_;
    std::unordered_set<NodeId> rehashed_;

    mutable std::mutex mu_;
};

} // namespace dmt

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "dmt/crypto.hpp"
#include "dmt/types.hpp"

namespace dmt {

/// Node record flag bits.
enum NodeFlags : std::uint32_t {
    kFlagLeaf = 1u << 0,
    kFlagPlaceholder = 1u << 1,
};

/// One metadata record. On disk it is 80 bytes, little-endian:
///
///   offset  size  field
///        0     8  parent (kNoNode when absent)
///        8     8  left child
///       16     8  right child
///       24     8  hotness (signed)
///       32    32  digest
///       64    12  iv (leaves only)
///       76     4  flags
///
/// The node id is implicit: record i lives at byte offset i * 80.
struct NodeRecord {
    NodeId parent = kNoNode;
    NodeId left = kNoNode;
    NodeId right = kNoNode;
    std::int64_t hotness = 0;
    Digest digest{};
    Iv iv{};
    std::uint32_t flags = 0;

    static constexpr std::size_t kSize = 80;

    void encode(std::span<std::uint8_t, kSize> out) const;
    static NodeRecord decode(std::span<const std::uint8_t, kSize> in);

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct StoreLayout {
    std::uint64_t n_blocks = 0;
    std::uint32_t block_size = kDefaultBlockSize;
    std::uint64_t max_nodes = 0;
    std::filesystem::path data_path;
    std::filesystem::path meta_path;

    std::uint64_t capacity_bytes() const { return n_blocks * block_size; }
    std::uint64_t data_file_size() const { return n_blocks * block_size; }
    std::uint64_t meta_file_size() const { return max_nodes * NodeRecord::kSize; }
};

enum class Region { data, meta };

struct FlipBit {
    unsigned bit = 0; // 0..7 within the addressed byte
};
struct Overwrite {
    std::vector<std::uint8_t> bytes;
};
/// Bytes captured earlier with UntrustedStore::record().
struct RestoreSnapshot {
    std::vector<std::uint8_t> bytes;
};
using Mutation = std::variant<FlipBit, Overwrite, RestoreSnapshot>;

struct StoreStats {
    std::uint64_t data_reads = 0;
    std::uint64_t data_writes = 0;
    std::uint64_t meta_reads = 0;
    std::uint64_t meta_writes = 0;
};

/// Simulated untrusted device: a data file of ciphertext blocks and a
/// metadata file of fixed-size node records. Not internally synchronized.
class UntrustedStore {
public:
    /// Creates zero-filled images. Refuses to clobber existing files unless
    /// `force` is set.
    static UntrustedStore create(const StoreLayout& layout, bool force);
    static UntrustedStore open(const StoreLayout& layout);

    UntrustedStore(UntrustedStore&& other) noexcept;
    UntrustedStore& operator=(UntrustedStore&& other) noexcept;
    UntrustedStore(const UntrustedStore&) = delete;
    UntrustedStore& operator=(const UntrustedStore&) = delete;
    ~UntrustedStore();

    const StoreLayout& layout() const { return layout_; }

    std::vector<std::uint8_t> read_block_raw(BlockId block);
    void write_block_raw(BlockId block, std::span<const std::uint8_t> ciphertext);

    NodeRecord read_node(NodeId node);
    void write_node(NodeId node, const NodeRecord& rec);
    /// Reads `count` consecutive records starting at `first`. Uncounted
    /// reads do not show up in stats().
    std::vector<NodeRecord> read_nodes(NodeId first, std::uint64_t count, bool counted = true);
    void write_nodes(NodeId first, std::span<const NodeRecord> recs);

    /// Busy-waits this long on every data block access. Zero disables it.
    void set_device_latency(std::chrono::microseconds latency) { latency_ = latency; }

    /// Adversarial hooks. Both throw UsageError unless tamper mode is on.
    void enable_tamper(bool on) { tamper_enabled_ = on; }
    std::vector<std::uint8_t> record(Region region, std::uint64_t offset,
                                     std::uint64_t length);
    void tamper(Region region, std::uint64_t offset, const Mutation& mutation);

    static std::uint64_t node_offset(NodeId node) { return node.value * NodeRecord::kSize; }
    std::uint64_t block_offset(BlockId block) const { return block.value * layout_.block_size; }

    const StoreStats& stats() const { return stats_; }
    void flush();

private:
    UntrustedStore(StoreLayout layout, int data_fd, int meta_fd);

    void check_block(BlockId block) const;
    void check_node(NodeId node, std::uint64_t count = 1) const;
    void read_at(int fd, std::uint8_t* buf, std::size_t len, std::uint64_t off) const;
    void write_at(int fd, const std::uint8_t* buf, std::size_t len, std::uint64_t off);
    void device_delay() const;
    int fd_for(Region region) const { return region == Region::data ? data_fd_ : meta_fd_; }

    StoreLayout layout_;
    int data_fd_ = -1;
    int meta_fd_ = -1;
    std::chrono::microseconds latency_{0};
    bool tamper_enabled_ = false;
    StoreStats stats_;
};

} // namespace dmt

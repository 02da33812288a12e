#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dmt/store.hpp"
#include "dmt/types.hpp"

namespace dmt {

inline constexpr unsigned kMaxArity = 64;

/// Ordered children of one node, stored inline.
class ChildList {
public:
    void push(NodeId id) { ids_[count_++] = id; }
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    NodeId operator[](std::size_t i) const { return ids_[i]; }
    const NodeId* begin() const { return ids_.data(); }
    const NodeId* end() const { return ids_.data() + count_; }

private:
    std::array<NodeId, kMaxArity> ids_{};
    unsigned count_ = 0;
};

/// What a self-adjusting topology may ask of the engine while it holds the
/// global lock. Digests live in the engine; the topology only moves pointers.
class SplayHost {
public:
    virtual ~SplayHost() = default;

    virtual bool cached(NodeId node) = 0;
    virtual std::int64_t hotness(NodeId node) = 0;
    virtual void adjust_hotness(NodeId node, std::int64_t delta) = 0;

    /// Makes every child of every node on the leaf-to-root path trusted.
    /// Throws IntegrityError; no state changes on failure.
    virtual void authenticate_path(NodeId leaf) = 0;

    /// Recomputes an internal node's digest from its current children.
    virtual void rehash(NodeId node) = 0;

    /// Persists a finished restructure. `touched` lists every node whose
    /// pointers changed; rehashed nodes are tracked by the host.
    virtual void commit_restructure(std::span<const NodeId> touched, unsigned rotations) = 0;
};

/// Structural contract shared by every tree strategy. Leaves and internal
/// nodes share one id space [0, node_count()).
class Topology {
public:
    virtual ~Topology() = default;

    virtual std::string name() const = 0;
    virtual std::uint64_t n_blocks() const = 0;
    virtual std::uint64_t node_count() const = 0;
    virtual unsigned arity() const = 0;

    virtual NodeId root() const = 0;
    /// kNoNode for the root.
    virtual NodeId parent(NodeId node) const = 0;
    virtual ChildList children(NodeId node) const = 0;
    virtual bool is_leaf(NodeId node) const = 0;
    virtual NodeId leaf_of(BlockId block) const = 0;
    /// nullopt for internal nodes and padding leaves.
    virtual std::optional<BlockId> block_of(NodeId node) const = 0;

    /// Pointer trees persist parent/child ids in their records.
    virtual bool stores_pointers() const { return false; }
    /// Rebuilds the in-memory structure from persisted records.
    virtual void load_pointers(std::span<const NodeRecord> records);

    /// Runs after each successful verify or update, before returning.
    virtual void post_access(NodeId leaf, SplayHost& host);

    /// Edges from the root.
    unsigned depth(NodeId node) const;
    /// Depth of each block's leaf, indexed by block.
    std::vector<unsigned> leaf_depths() const;
    /// Every node, children before parents, root last.
    std::vector<NodeId> bottom_up_order() const;
    /// Record flags for a node (leaf/placeholder bits).
    std::uint32_t flags_of(NodeId node) const;

    /// One line per node: `node_id parent left right depth`, -1 for none.
    /// For k > 2, left/right are the first and last child.
    void export_shape(std::ostream& out) const;
};

/// Depth -> number of block leaves at that depth, as `depth,count` CSV.
void export_depth_histogram(const Topology& topo, std::ostream& out);

} // namespace dmt

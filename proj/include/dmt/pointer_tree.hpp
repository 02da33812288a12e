#pragma once

#include <vector>

#include "dmt/topology.hpp"

namespace dmt {

/// Binary tree with explicit pointers over 2n-1 nodes. Internal nodes are
/// 0..n-2 and the leaf for block b is always n-1+b, so the block/leaf
/// mapping never changes when the shape does.
class PointerTopology : public Topology {
public:
    explicit PointerTopology(std::uint64_t n_blocks);

    std::uint64_t n_blocks() const override { return n_; }
    std::uint64_t node_count() const override { return 2 * n_ - 1; }
    unsigned arity() const override { return 2; }

    NodeId root() const override { return root_; }
    NodeId parent(NodeId node) const override;
    ChildList children(NodeId node) const override;
    bool is_leaf(NodeId node) const override;
    NodeId leaf_of(BlockId block) const override;
    std::optional<BlockId> block_of(NodeId node) const override;

    bool stores_pointers() const override { return true; }
    void load_pointers(std::span<const NodeRecord> records) override;

    NodeId left(NodeId node) const { return left_.at(node.value); }
    NodeId right(NodeId node) const { return right_.at(node.value); }

    /// Installs a full shape. Throws UsageError unless it is a valid full
    /// binary tree over exactly these leaves.
    void assign(NodeId root, std::vector<NodeId> parent, std::vector<NodeId> left,
                std::vector<NodeId> right);

    /// Throws std::logic_error describing the first violated invariant.
    void validate() const;

protected:
    void check(NodeId node) const;

    std::uint64_t n_;
    NodeId root_;
    std::vector<NodeId> parent_;
    std::vector<NodeId> left_;
    std::vector<NodeId> right_;
};

} // namespace dmt

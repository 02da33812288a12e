#pragma once

#include "dmt/topology.hpp"

namespace dmt {

/// ceil(log_k n), at least 1.
unsigned tree_height(std::uint64_t n_leaves, unsigned k);

/// Complete k-ary tree in heap order. Children of i are k*i+1 .. k*i+k.
/// The leaf level is padded to k^height with placeholder leaves whose digest
/// is all zeros.
class BalancedTopology final : public Topology {
public:
    BalancedTopology(std::uint64_t n_blocks, TreeArity arity);

    std::string name() const override;
    std::uint64_t n_blocks() const override { return n_blocks_; }
    std::uint64_t node_count() const override { return node_count_; }
    unsigned arity() const override { return k_; }

    NodeId root() const override { return NodeId{0}; }
    NodeId parent(NodeId node) const override;
    ChildList children(NodeId node) const override;
    bool is_leaf(NodeId node) const override;
    NodeId leaf_of(BlockId block) const override;
    std::optional<BlockId> block_of(NodeId node) const override;

    unsigned height() const { return height_; }
    std::uint64_t first_leaf() const { return first_leaf_; }

private:
    void check(NodeId node) const;

    std::uint64_t n_blocks_;
    unsigned k_;
    unsigned height_;
    std::uint64_t first_leaf_;
    std::uint64_t node_count_;
};

} // namespace dmt

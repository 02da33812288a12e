#include "dmt/balanced_topology.hpp"

namespace dmt {

unsigned tree_height(std::uint64_t n_leaves, unsigned k)
{
    if (n_leaves == 0 || k < 2) {
        throw UsageError("tree needs at least one leaf and arity >= 2");
    }
    unsigned h = 0;
    std::uint64_t span = 1;
    while (span < n_leaves) {
        span *= k;
        ++h;
    }
    return h == 0 ? 1 : h;
}

BalancedTopology::BalancedTopology(std::uint64_t n_blocks, TreeArity arity)
    : n_blocks_(n_blocks), k_(arity.value()), height_(tree_height(n_blocks, arity.value()))
{
    std::uint64_t level = 1;
    std::uint64_t above = 0;
    for (unsigned i = 0; i < height_; ++i) {
        above += level;
        level *= k_;
    }
    first_leaf_ = above;
    node_count_ = above + level;
}

std::string BalancedTopology::name() const
{
    return "balanced:" + std::to_string(k_);
}

void BalancedTopology::check(NodeId node) const
{
    if (node.value >= node_count_) {
        throw RangeError("node " + std::to_string(node.value) + " out of range");
    }
}

NodeId BalancedTopology::parent(NodeId node) const
{
    check(node);
    if (node.value == 0) {
        return kNoNode;
    }
    return NodeId{(node.value - 1) / k_};
}

ChildList BalancedTopology::children(NodeId node) const
{
    check(node);
    ChildList out;
    if (node.value < first_leaf_) {
        std::uint64_t first = node.value * k_ + 1;
        for (unsigned i = 0; i < k_; ++i) {
            out.push(NodeId{first + i});
        }
    }
    return out;
}

bool BalancedTopology::is_leaf(NodeId node) const
{
    check(node);
    return node.value >= first_leaf_;
}

NodeId BalancedTopology::leaf_of(BlockId block) const
{
    if (block.value >= n_blocks_) {
        throw RangeError("block " + std::to_string(block.value) + " out of range");
    }
    return NodeId{first_leaf_ + block.value};
}

std::optional<BlockId> BalancedTopology::block_of(NodeId node) const
{
    check(node);
    if (node.value < first_leaf_ || node.value - first_leaf_ >= n_blocks_) {
        return std::nullopt;
    }
    return BlockId{node.value - first_leaf_};
}

} // namespace dmt

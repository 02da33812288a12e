#include "dmt/pointer_tree.hpp"

#include <stdexcept>

namespace dmt {

PointerTopology::PointerTopology(std::uint64_t n_blocks)
    : n_(n_blocks), root_(NodeId{0})
{
    if (n_blocks == 0) {
        throw UsageError("tree needs at least one block");
    }
    parent_.assign(2 * n_ - 1, kNoNode);
    left_.assign(2 * n_ - 1, kNoNode);
    right_.assign(2 * n_ - 1, kNoNode);
}

void PointerTopology::check(NodeId node) const
{
    if (node.value >= parent_.size()) {
        throw RangeError("node " + std::to_string(node.value) + " out of range");
    }
}

NodeId PointerTopology::parent(NodeId node) const
{
    check(node);
    return parent_[node.value];
}

ChildList PointerTopology::children(NodeId node) const
{
    check(node);
    ChildList out;
    if (node.value < n_ - 1) {
        out.push(left_[node.value]);
        out.push(right_[node.value]);
    }
    return out;
}

bool PointerTopology::is_leaf(NodeId node) const
{
    check(node);
    return node.value >= n_ - 1;
}

NodeId PointerTopology::leaf_of(BlockId block) const
{
    if (block.value >= n_) {
        throw RangeError("block " + std::to_string(block.value) + " out of range");
    }
    return NodeId{n_ - 1 + block.value};
}

std::optional<BlockId> PointerTopology::block_of(NodeId node) const
{
    check(node);
    if (node.value < n_ - 1) {
        return std::nullopt;
    }
    return BlockId{node.value - (n_ - 1)};
}

void PointerTopology::assign(NodeId root, std::vector<NodeId> parent, std::vector<NodeId> left,
                             std::vector<NodeId> right)
{
    if (parent.size() != node_count() || left.size() != node_count() ||
        right.size() != node_count()) {
        throw UsageError("shape size does not match block count");
    }
    auto saved_root = root_;
    parent_.swap(parent);
    left_.swap(left);
    right_.swap(right);
    root_ = root;
    try {
        validate();
    } catch (const std::logic_error& e) {
        parent_.swap(parent);
        left_.swap(left);
        right_.swap(right);
        root_ = saved_root;
        throw UsageError(std::string("invalid tree shape: ") + e.what());
    }
}

void PointerTopology::load_pointers(std::span<const NodeRecord> records)
{
    if (records.size() != node_count()) {
        throw UsageError("metadata holds " + std::to_string(records.size()) +
                         " records, tree needs " + std::to_string(node_count()));
    }
    std::vector<NodeId> parent(records.size()), left(records.size()), right(records.size());
    NodeId root = kNoNode;
    for (std::size_t i = 0; i < records.size(); ++i) {
        parent[i] = records[i].parent;
        left[i] = records[i].left;
        right[i] = records[i].right;
        if (parent[i] == kNoNode) {
            if (root != kNoNode) {
                IntegrityReport r;
                r.node = NodeId{i};
                r.what = "metadata has more than one root";
                throw IntegrityError(r);
            }
            root = NodeId{i};
        }
    }
    try {
        assign(root, std::move(parent), std::move(left), std::move(right));
    } catch (const UsageError& e) {
        IntegrityReport r;
        r.node = root;
        r.what = e.what();
        throw IntegrityError(r);
    }
}

void PointerTopology::validate() const
{
    const std::uint64_t total = node_count();
    auto valid = [&](NodeId n) { return n.value < total; };
    if (!valid(root_) || parent_[root_.value] != kNoNode) {
        throw std::logic_error("root is missing or has a parent");
    }
    if (n_ > 1 && root_.value >= n_ - 1) {
        throw std::logic_error("root is a leaf");
    }
    for (std::uint64_t i = 0; i < total; ++i) {
        bool leaf = i >= n_ - 1;
        if (leaf) {
            if (left_[i] != kNoNode || right_[i] != kNoNode) {
                throw std::logic_error("leaf " + std::to_string(i) + " has children");
            }
        } else {
            NodeId l = left_[i], r = right_[i];
            if (!valid(l) || !valid(r) || l == r) {
                throw std::logic_error("internal node " + std::to_string(i) +
                                       " lacks two distinct children");
            }
            if (parent_[l.value] != NodeId{i} || parent_[r.value] != NodeId{i}) {
                throw std::logic_error("child of " + std::to_string(i) +
                                       " points to another parent");
            }
        }
        if (NodeId{i} != root_ && !valid(parent_[i])) {
            throw std::logic_error("node " + std::to_string(i) + " has no parent");
        }
    }
    std::vector<bool> seen(total, false);
    std::vector<NodeId> queue{root_};
    seen[root_.value] = true;
    for (std::size_t i = 0; i < queue.size(); ++i) {
        NodeId n = queue[i];
        if (n.value < n_ - 1) {
            for (NodeId c : {left_[n.value], right_[n.value]}) {
                if (seen[c.value]) {
                    throw std::logic_error("node " + std::to_string(c.value) +
                                           " reached twice");
                }
                seen[c.value] = true;
                queue.push_back(c);
            }
        }
    }
    if (queue.size() != total) {
        throw std::logic_error("tree does not reach every node");
    }
}

} // namespace dmt

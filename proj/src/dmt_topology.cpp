#include "dmt/dmt_topology.hpp"

#include <array>
#include <stdexcept>

namespace dmt {

DmtTopology::DmtTopology(std::uint64_t n_blocks, SplayPolicy policy)
    : PointerTopology(n_blocks), policy_(policy), rng_(policy.seed)
{
    if (!(policy.probability >= 0.0 && policy.probability <= 1.0)) {
        throw UsageError("splay probability must be in [0, 1]");
    }
    coin_ = std::bernoulli_distribution(policy.probability);
    std::vector<NodeId> parent(node_count(), kNoNode), left(node_count(), kNoNode),
        right(node_count(), kNoNode);
    for (std::uint64_t i = 0; i + 1 < n_; ++i) {
        left[i] = NodeId{2 * i + 1};
        right[i] = NodeId{2 * i + 2};
        parent[2 * i + 1] = NodeId{i};
        parent[2 * i + 2] = NodeId{i};
    }
    assign(NodeId{0}, std::move(parent), std::move(left), std::move(right));
}

std::optional<unsigned> DmtTopology::splay_decision(NodeId leaf, SplayHost& host)
{
    if (!policy_.window) {
        return std::nullopt;
    }
    if (!coin_(rng_)) {
        return std::nullopt;
    }
    if (!host.cached(leaf)) {
        return std::nullopt;
    }
    return static_cast<unsigned>(host.hotness(leaf)) + 1;
}

void DmtTopology::post_access(NodeId leaf, SplayHost& host)
{
    auto d = splay_decision(leaf, host);
    if (!d) {
        return;
    }
    NodeId x = parent(leaf);
    if (x == kNoNode || parent(x) == kNoNode) {
        return;
    }
    host.authenticate_path(leaf);
    splay(x, leaf, *d, host);
}

bool DmtTopology::is_left_child(NodeId x) const
{
    NodeId p = parent_[x.value];
    return p != kNoNode && left_[p.value] == x;
}

void DmtTopology::orient(NodeId x, NodeId leaf, bool x_is_left)
{
    NodeId& outer = x_is_left ? left_[x.value] : right_[x.value];
    NodeId& inner = x_is_left ? right_[x.value] : left_[x.value];
    if (outer == leaf) {
        return;
    }
    if (inner != leaf) {
        throw std::logic_error("splay target lost the accessed leaf");
    }
    std::swap(outer, inner);
}

void DmtTopology::rotate(NodeId x, std::vector<NodeId>& touched)
{
    NodeId q = parent_[x.value];
    NodeId r = parent_[q.value];
    NodeId inner;
    if (left_[q.value] == x) {
        inner = right_[x.value];
        left_[q.value] = inner;
        right_[x.value] = q;
    } else {
        inner = left_[x.value];
        right_[q.value] = inner;
        left_[x.value] = q;
    }
    parent_[inner.value] = q;
    parent_[q.value] = x;
    parent_[x.value] = r;
    if (r == kNoNode) {
        root_ = x;
    } else if (left_[r.value] == q) {
        left_[r.value] = x;
    } else {
        right_[r.value] = x;
    }
    touched.push_back(x);
    touched.push_back(q);
    touched.push_back(inner);
    if (r != kNoNode) {
        touched.push_back(r);
    }
}

unsigned DmtTopology::splay(NodeId x, NodeId leaf, unsigned d, SplayHost& host)
{
    if (is_leaf(x) || parent_[leaf.value] != x) {
        throw UsageError("splay target must be the accessed leaf's parent");
    }
    std::vector<NodeId> touched;
    unsigned promoted = 0;
    unsigned rotations = 0;
    while (promoted < d) {
        NodeId p = parent_[x.value];
        if (p == kNoNode) {
            break;
        }
        NodeId g = parent_[p.value];

        // Subtree roots whose depth a step can change.
        std::array<NodeId, 7> local{};
        std::size_t n_local = 0;
        auto add = [&](NodeId n) {
            if (n != kNoNode) {
                local[n_local++] = n;
            }
        };
        add(x);
        add(left_[x.value]);
        add(right_[x.value]);
        add(p);
        add(left_[p.value] == x ? right_[p.value] : left_[p.value]);
        if (g != kNoNode) {
            add(g);
            add(left_[g.value] == p ? right_[g.value] : left_[g.value]);
        }
        std::array<unsigned, 7> before{};
        for (std::size_t i = 0; i < n_local; ++i) {
            before[i] = depth(local[i]);
        }

        std::array<NodeId, 3> changed{};
        if (g == kNoNode) {
            orient(x, leaf, is_left_child(x));
            rotate(x, touched);
            promoted += 1;
            rotations += 1;
            changed = {p, x, kNoNode};
        } else if (is_left_child(x) == is_left_child(p)) {
            rotate(p, touched);
            orient(x, leaf, is_left_child(x));
            rotate(x, touched);
            promoted += 2;
            rotations += 2;
            changed = {g, p, x};
        } else {
            orient(x, leaf, is_left_child(x));
            rotate(x, touched);
            orient(x, leaf, is_left_child(x));
            rotate(x, touched);
            promoted += 2;
            rotations += 2;
            changed = {p, g, x};
        }

        for (std::size_t i = 0; i < n_local; ++i) {
            auto delta = static_cast<std::int64_t>(before[i]) -
                         static_cast<std::int64_t>(depth(local[i]));
            if (delta != 0) {
                host.adjust_hotness(local[i], delta);
            }
        }
        for (NodeId c : changed) {
            if (c != kNoNode) {
                host.rehash(c);
            }
        }
        for (NodeId a = parent_[x.value]; a != kNoNode; a = parent_[a.value]) {
            host.rehash(a);
        }
    }
    if (rotations > 0) {
        host.commit_restructure(touched, rotations);
        ++stats_.splays;
        stats_.rotations += rotations;
    }
    return promoted;
}

} // namespace dmt

#include "dmt/topology.hpp"

#include <algorithm>
#include <map>

namespace dmt {

void Topology::load_pointers(std::span<const NodeRecord>) {}

void Topology::post_access(NodeId, SplayHost&) {}

unsigned Topology::depth(NodeId node) const
{
    unsigned d = 0;
    for (NodeId p = parent(node); p != kNoNode; p = parent(p)) {
        ++d;
    }
    return d;
}

std::vector<NodeId> Topology::bottom_up_order() const
{
    std::vector<NodeId> order;
    order.reserve(node_count());
    order.push_back(root());
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (NodeId c : children(order[i])) {
            order.push_back(c);
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

std::vector<unsigned> Topology::leaf_depths() const
{
    std::vector<unsigned> node_depth(node_count(), 0);
    std::vector<unsigned> out(n_blocks(), 0);
    std::vector<NodeId> queue{root()};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        NodeId n = queue[i];
        if (auto b = block_of(n)) {
            out[b->value] = node_depth[n.value];
        }
        for (NodeId c : children(n)) {
            node_depth[c.value] = node_depth[n.value] + 1;
            queue.push_back(c);
        }
    }
    return out;
}

std::uint32_t Topology::flags_of(NodeId node) const
{
    if (!is_leaf(node)) {
        return 0;
    }
    return block_of(node) ? kFlagLeaf : (kFlagLeaf | kFlagPlaceholder);
}

void Topology::export_shape(std::ostream& out) const
{
    auto signed_id = [](NodeId n) -> long long {
        return n == kNoNode ? -1 : static_cast<long long>(n.value);
    };
    std::vector<unsigned> node_depth(node_count(), 0);
    std::vector<NodeId> queue{root()};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        for (NodeId c : children(queue[i])) {
            node_depth[c.value] = node_depth[queue[i].value] + 1;
            queue.push_back(c);
        }
    }
    for (std::uint64_t i = 0; i < node_count(); ++i) {
        NodeId n{i};
        ChildList kids = children(n);
        NodeId l = kids.empty() ? kNoNode : kids[0];
        NodeId r = kids.empty() ? kNoNode : kids[kids.size() - 1];
        out << i << ' ' << signed_id(parent(n)) << ' ' << signed_id(l) << ' '
            << signed_id(r) << ' ' << node_depth[i] << '\n';
    }
}

void export_depth_histogram(const Topology& topo, std::ostream& out)
{
    std::map<unsigned, std::uint64_t> hist;
    for (unsigned d : topo.leaf_depths()) {
        ++hist[d];
    }
    out << "depth,count\n";
    for (auto [d, c] : hist) {
        out << d << ',' << c << '\n';
    }
}

} // namespace dmt

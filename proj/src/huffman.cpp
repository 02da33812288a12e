#include "dmt/huffman.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <queue>

namespace dmt {

HuffmanShape build_huffman(const FrequencyProfile& profile)
{
    const std::uint64_t n = profile.size();
    if (n == 0) {
        throw UsageError("cannot build a tree over an empty profile");
    }
    HuffmanShape s;
    s.n = n;
    s.parent.assign(2 * n - 1, kNoNode);
    s.left.assign(2 * n - 1, kNoNode);
    s.right.assign(2 * n - 1, kNoNode);

    struct Item {
        std::uint64_t weight;
        std::uint64_t order;
        NodeId node;
    };
    auto later = [](const Item& a, const Item& b) {
        return a.weight != b.weight ? a.weight > b.weight : a.order > b.order;
    };
    std::priority_queue<Item, std::vector<Item>, decltype(later)> heap(later);
    for (std::uint64_t b = 0; b < n; ++b) {
        std::uint64_t w = std::max<std::uint64_t>(profile.weights()[b], 1);
        heap.push({w, b, NodeId{n - 1 + b}});
    }
    std::uint64_t order = n;
    std::uint64_t merge = 0;
    while (heap.size() > 1) {
        Item a = heap.top();
        heap.pop();
        Item b = heap.top();
        heap.pop();
        // Root ends up as 0: the last merge takes the smallest id.
        NodeId id{n - 2 - merge++};
        s.left[id.value] = a.node;
        s.right[id.value] = b.node;
        s.parent[a.node.value] = id;
        s.parent[b.node.value] = id;
        if (a.weight > std::numeric_limits<std::uint64_t>::max() - b.weight) {
            throw RangeError("profile weights overflow");
        }
        heap.push({a.weight + b.weight, order++, id});
    }
    s.root = heap.top().node;

    s.depth_of.assign(n, 0);
    std::vector<unsigned> depth(2 * n - 1, 0);
    std::vector<NodeId> queue{s.root};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        NodeId x = queue[i];
        if (x.value >= n - 1) {
            s.depth_of[x.value - (n - 1)] = depth[x.value];
            continue;
        }
        for (NodeId c : {s.left[x.value], s.right[x.value]}) {
            depth[c.value] = depth[x.value] + 1;
            queue.push_back(c);
        }
    }
    return s;
}

std::uint64_t weighted_depth(const std::vector<unsigned>& depths, const FrequencyProfile& profile)
{
    if (depths.size() != profile.size()) {
        throw UsageError("depth map does not cover the profile");
    }
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        sum += profile.weights()[i] * depths[i];
    }
    return sum;
}

double expected_depth(const std::vector<unsigned>& depths, const FrequencyProfile& profile)
{
    std::uint64_t total = profile.total();
    if (total == 0) {
        throw UsageError("profile has no positive weight");
    }
    return static_cast<double>(weighted_depth(depths, profile)) / static_cast<double>(total);
}

double expected_depth(const HuffmanShape& shape, const FrequencyProfile& profile)
{
    return expected_depth(shape.depth_of, profile);
}

double kraft_sum(const std::vector<unsigned>& depths)
{
    double sum = 0.0;
    for (unsigned d : depths) {
        sum += std::ldexp(1.0, -static_cast<int>(d));
    }
    return sum;
}

FrequencyProfile trace_to_profile(const std::vector<WorkloadOp>& trace, std::uint32_t block_size,
                                  std::uint64_t n_blocks)
{
    FrequencyProfile p(std::vector<std::uint64_t>(n_blocks, 0));
    const std::uint64_t capacity = n_blocks * block_size;
    for (const auto& op : trace) {
        for (BlockId b : blocks_for_io(op.offset, op.length, block_size, capacity)) {
            p.add(b);
        }
    }
    return p;
}

OptimalTree brute_force_optimal(const FrequencyProfile& profile)
{
    const std::size_t n = profile.size();
    if (n == 0 || n > 8) {
        throw UsageError("brute force handles 1 to 8 blocks");
    }
    const unsigned full = (1u << n) - 1;
    // cost[S]: cheapest full binary tree whose leaves are exactly S, where a
    // leaf at depth d contributes f*d. Splitting S into two subtrees pushes
    // every leaf of S one level down, adding weight(S).
    std::vector<std::uint64_t> weight(full + 1, 0), cost(full + 1, 0);
    std::vector<unsigned> split(full + 1, 0);
    for (unsigned s = 1; s <= full; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            if (s & (1u << i)) {
                weight[s] += profile.weights()[i];
            }
        }
    }
    for (unsigned s = 1; s <= full; ++s) {
        if ((s & (s - 1)) == 0) {
            continue;
        }
        std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
        // Enumerate proper subsets a of s; each unordered split is seen twice.
        for (unsigned a = (s - 1) & s; a != 0; a = (a - 1) & s) {
            unsigned b = s ^ a;
            std::uint64_t c = cost[a] + cost[b] + weight[s];
            if (c < best) {
                best = c;
                split[s] = a;
            }
        }
        cost[s] = best;
    }
    OptimalTree out;
    out.cost = cost[full];
    out.depths.assign(n, 0);
    std::function<void(unsigned, unsigned)> walk = [&](unsigned s, unsigned d) {
        if ((s & (s - 1)) == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (s == (1u << i)) {
                    out.depths[i] = d;
                }
            }
            return;
        }
        walk(split[s], d + 1);
        walk(s ^ split[s], d + 1);
    };
    walk(full, 0);
    return out;
}

HuffmanTopology::HuffmanTopology(std::uint64_t n_blocks) : PointerTopology(n_blocks) {}

HuffmanTopology::HuffmanTopology(const HuffmanShape& shape) : PointerTopology(shape.n)
{
    assign(shape.root, shape.parent, shape.left, shape.right);
}

} // namespace dmt

#pragma once

#include <optional>
#include <random>

#include "dmt/pointer_tree.hpp"

namespace dmt {

struct SplayPolicy {
    bool window = true;       // w
    double probability = 0.01; // p
    std::uint64_t seed = 1;
};

struct SplayStats {
    std::uint64_t splays = 0;
    std::uint64_t rotations = 0;
};

/// Dynamic Merkle Tree. Starts as a heap-shaped complete binary tree
/// (children of i are 2i+1 and 2i+2) and splays the accessed leaf's parent
/// toward the root after accesses.
class DmtTopology final : public PointerTopology {
public:
    DmtTopology(std::uint64_t n_blocks, SplayPolicy policy);

    std::string name() const override { return "dmt"; }
    void post_access(NodeId leaf, SplayHost& host) override;

    /// nullopt to skip; otherwise the splay distance for this access.
    /// Consumes one Bernoulli draw whenever the window is open.
    std::optional<unsigned> splay_decision(NodeId leaf, SplayHost& host);

    /// Promotes `target` (the accessed leaf's parent) by at least
    /// min(d, depth) levels; may overshoot by one. `leaf` stays a child of
    /// `target`. Returns the number of levels gained.
    unsigned splay(NodeId target, NodeId leaf, unsigned d, SplayHost& host);

    const SplayPolicy& policy() const { return policy_; }
    const SplayStats& stats() const { return stats_; }

private:
    void orient(NodeId x, NodeId leaf, bool x_is_left);
    /// Rotates x above its parent.
    void rotate(NodeId x, std::vector<NodeId>& touched);
    bool is_left_child(NodeId x) const;

    SplayPolicy policy_;
    std::mt19937_64 rng_;
    std::bernoulli_distribution coin_;
    SplayStats stats_;
};

} // namespace dmt

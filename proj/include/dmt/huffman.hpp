#pragma once

#include <vector>

#include "dmt/pointer_tree.hpp"

namespace dmt {

/// A full binary tree produced by Huffman's algorithm, in the PointerTopology
/// id layout (leaf for block b is n-1+b, root is 0).
struct HuffmanShape {
    std::uint64_t n = 0;
    NodeId root = kNoNode;
    std::vector<NodeId> parent;
    std::vector<NodeId> left;
    std::vector<NodeId> right;
    /// Codeword length of each block: edges from the root to its leaf.
    std::vector<unsigned> depth_of;
};

/// Huffman construction over the profile. Ties pop in (weight, creation
/// order); zero weights count as 1 so every block gets a leaf.
HuffmanShape build_huffman(const FrequencyProfile& profile);

/// Sum of weight * depth over all blocks, exact.
std::uint64_t weighted_depth(const std::vector<unsigned>& depths, const FrequencyProfile& profile);

/// Sum of f_i * depth_i / sum of f_i.
double expected_depth(const std::vector<unsigned>& depths, const FrequencyProfile& profile);
double expected_depth(const HuffmanShape& shape, const FrequencyProfile& profile);

/// Kraft sum, sum of 2^-depth_i; 1 for any full binary tree.
double kraft_sum(const std::vector<unsigned>& depths);

/// Access counts per block over the de-multiplexed block stream of a trace.
FrequencyProfile trace_to_profile(const std::vector<WorkloadOp>& trace, std::uint32_t block_size,
                                  std::uint64_t n_blocks);

struct OptimalTree {
    std::uint64_t cost = 0; // minimal sum of f_i * depth_i
    std::vector<unsigned> depths;
};

/// Exhaustive minimum over every full binary tree with n labeled leaves.
/// n <= 8; throws UsageError otherwise.
OptimalTree brute_force_optimal(const FrequencyProfile& profile);

/// H-OPT: a fixed pointer tree taken from a Huffman shape.
class HuffmanTopology final : public PointerTopology {
public:
    /// Empty shell for reopening an image; call load_pointers().
    explicit HuffmanTopology(std::uint64_t n_blocks);
    explicit HuffmanTopology(const HuffmanShape& shape);

    std::string name() const override { return "huffman"; }
};

} // namespace dmt

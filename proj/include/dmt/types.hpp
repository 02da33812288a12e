#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmt {

inline constexpr std::uint32_t kDefaultBlockSize = 4096;
inline constexpr std::size_t kDigestSize = 32;

/// Index of a data block on the protected device, in [0, n_blocks).
struct BlockId {
    std::uint64_t value = 0;

    friend constexpr auto operator<=>(BlockId, BlockId) = default;
};

/// Identifier of a hash-tree node. Leaves and internal nodes share one space.
struct NodeId {
    std::uint64_t value = 0;

    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

inline constexpr NodeId kNoNode{std::numeric_limits<std::uint64_t>::max()};

using Digest = std::array<std::uint8_t, kDigestSize>;

std::string to_hex(const std::uint8_t* data, std::size_t len);
inline std::string to_hex(const Digest& d) { return to_hex(d.data(), d.size()); }

inline bool is_zero(const Digest& d)
{
    for (auto b : d) {
        if (b != 0) {
            return false;
        }
    }
    return true;
}

/// Root digest held in trusted storage together with its version counter.
struct RootAnchor {
    Digest digest{};
    std::uint64_t generation = 0;

    friend bool operator==(const RootAnchor&, const RootAnchor&) = default;
};

/// Per-block access weights. Weights are integers so optimality comparisons
/// stay exact.
class FrequencyProfile {
public:
    FrequencyProfile() = default;
    explicit FrequencyProfile(std::vector<std::uint64_t> weights);

    std::size_t size() const { return weights_.size(); }
    std::uint64_t weight(BlockId b) const { return weights_.at(b.value); }
    const std::vector<std::uint64_t>& weights() const { return weights_; }
    std::uint64_t total() const;

    void add(BlockId b, std::uint64_t count = 1);

private:
    std::vector<std::uint64_t> weights_;
};

/// Tree fan-out. Only 2, 4, 8 and 64 are supported.
class TreeArity {
public:
    explicit TreeArity(unsigned k);
    unsigned value() const { return k_; }

private:
    unsigned k_;
};

enum class OpKind : std::uint8_t { read, write };

/// One I/O request against the device.
struct WorkloadOp {
    std::uint64_t t_ns = 0;
    OpKind kind = OpKind::read;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    friend bool operator==(const WorkloadOp&, const WorkloadOp&) = default;
};

/// Maps a byte range to the ordered list of blocks it touches.
/// Throws RangeError when the range exceeds `capacity`.
std::vector<BlockId> blocks_for_io(std::uint64_t offset, std::uint64_t length,
                                   std::uint32_t block_size,
                                   std::uint64_t capacity);

// Error hierarchy. The CLI maps these onto exit codes.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// AEAD tag mismatch when opening a sealed block.
class AuthenticityError : public Error {
public:
    using Error::Error;
};

/// Details of a failed verification, kept for the forensic dump.
struct IntegrityReport {
    BlockId block{};
    NodeId node = kNoNode;
    unsigned level = 0; // edges above the leaf; 0 means the block/leaf itself
    Digest expected{};
    Digest computed{};
    std::string what;
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(IntegrityReport report);
    const IntegrityReport& report() const { return report_; }

private:
    IntegrityReport report_;
};

} // namespace dmt

template <>
struct std::hash<dmt::NodeId> {
    std::size_t operator()(dmt::NodeId id) const noexcept
    {
        return std::hash<std::uint64_t>{}(id.value);
    }
};

template <>
struct std::hash<dmt::BlockId> {
    std::size_t operator()(dmt::BlockId id) const noexcept
    {
        return std::hash<std::uint64_t>{}(id.value);
    }
};

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "dmt/types.hpp"

namespace dmt {

using Iv = std::array<std::uint8_t, 12>;
using Tag = std::array<std::uint8_t, 16>;

/// Block encryption key and internal-node hashing key. Never persisted next
/// to the data or metadata images.
struct KeyMaterial {
    std::array<std::uint8_t, 16> block_key{};
    std::array<std::uint8_t, 32> node_key{};

    static constexpr std::size_t kFileSize = 48;

    /// Reads the 48-byte key file (block key followed by node key).
    static KeyMaterial load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    static KeyMaterial random();
    /// Deterministic keys for tests and reproducible benchmarks.
    static KeyMaterial from_seed(std::uint64_t seed);
};

struct SealedBlock {
    std::vector<std::uint8_t> ciphertext;
    Iv iv{};
    Tag mac{};
};

/// Authenticated encryption for blocks plus keyed hashing for internal
/// nodes. Implementations are immutable after construction and may be shared
/// between threads.
class CryptoProvider {
public:
    virtual ~CryptoProvider() = default;

    /// Encrypts one block. The block id is bound as associated data, so a
    /// sealed block copied to another id fails to open.
    virtual SealedBlock seal_block(BlockId block,
                                   std::span<const std::uint8_t> plaintext,
                                   const Iv& iv) const = 0;

    /// Throws AuthenticityError unless the tag verifies for (id, iv, data).
    virtual std::vector<std::uint8_t>
    open_block(BlockId block, const SealedBlock& sealed) const = 0;

    /// Keyed hash over the raw bytes.
    virtual Digest keyed_hash(std::span<const std::uint8_t> data) const = 0;

    /// Keyed hash over the ordered concatenation of child digests.
    Digest node_digest(std::span<const Digest> children) const;

    /// The GCM tag left-aligned in a 32-byte field, zero-padded.
    static Digest leaf_digest(const SealedBlock& sealed);
    static Digest leaf_digest(const Tag& mac);
    static Tag mac_of(const Digest& leaf);
};

/// AES-128-GCM for blocks, HMAC-SHA-256 for nodes.
std::unique_ptr<CryptoProvider> make_openssl_provider(const KeyMaterial& keys);

/// Non-cryptographic stand-in with the same interface. Tamper-sensitive
/// enough for structural tests, fast enough for large fuzz runs. Not secure.
std::unique_ptr<CryptoProvider> make_fast_provider(const KeyMaterial& keys);

} // namespace dmt

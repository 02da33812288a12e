// OpenSSL 3 marks the low-level SHA-256 API deprecated; it is the only way to
// reuse precomputed HMAC pad states, which keeps small-input hashing cheap.
#define OPENSSL_SUPPRESS_DEPRECATED

#include "dmt/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

namespace dmt {

namespace {

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx new_cipher_ctx()
{
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) {
        throw Error("EVP_CIPHER_CTX_new failed");
    }
    return ctx;
}

std::array<std::uint8_t, 8> block_aad(BlockId block)
{
    std::array<std::uint8_t, 8> aad{};
    for (int i = 0; i < 8; ++i) {
        aad[i] = static_cast<std::uint8_t>(block.value >> (8 * i));
    }
    return aad;
}

class OpenSslProvider final : public CryptoProvider {
public:
    explicit OpenSslProvider(const KeyMaterial& keys) : block_key_(keys.block_key)
    {
        std::array<std::uint8_t, SHA256_CBLOCK> pad{};
        for (std::size_t i = 0; i < pad.size(); ++i) {
            std::uint8_t k = i < keys.node_key.size() ? keys.node_key[i] : 0;
            pad[i] = k ^ 0x36;
        }
        SHA256_Init(&inner_);
        SHA256_Update(&inner_, pad.data(), pad.size());
        for (std::size_t i = 0; i < pad.size(); ++i) {
            std::uint8_t k = i < keys.node_key.size() ? keys.node_key[i] : 0;
            pad[i] = k ^ 0x5c;
        }
        SHA256_Init(&outer_);
        SHA256_Update(&outer_, pad.data(), pad.size());
    }

    SealedBlock seal_block(BlockId block, std::span<const std::uint8_t> plaintext,
                           const Iv& iv) const override
    {
        SealedBlock out;
        out.iv = iv;
        out.ciphertext.resize(plaintext.size());
        auto ctx = new_cipher_ctx();
        auto aad = block_aad(block);
        int len = 0;
        bool ok = EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr,
                                     nullptr, nullptr) == 1 &&
                  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN,
                                      static_cast<int>(iv.size()), nullptr) == 1 &&
                  EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr,
                                     block_key_.data(), iv.data()) == 1 &&
                  EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                    static_cast<int>(aad.size())) == 1 &&
                  EVP_EncryptUpdate(ctx.get(), out.ciphertext.data(), &len,
                                    plaintext.data(),
                                    static_cast<int>(plaintext.size())) == 1 &&
                  EVP_EncryptFinal_ex(ctx.get(), out.ciphertext.data() + len,
                                      &len) == 1 &&
                  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG,
                                      static_cast<int>(out.mac.size()),
                                      out.mac.data()) == 1;
        if (!ok) {
            throw Error("AES-GCM encryption failed");
        }
        return out;
    }

    std::vector<std::uint8_t> open_block(BlockId block,
                                         const SealedBlock& sealed) const override
    {
        std::vector<std::uint8_t> plain(sealed.ciphertext.size());
        auto ctx = new_cipher_ctx();
        auto aad = block_aad(block);
        Tag tag = sealed.mac;
        int len = 0;
        bool ok = EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr,
                                     nullptr, nullptr) == 1 &&
                  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN,
                                      static_cast<int>(sealed.iv.size()),
                                      nullptr) == 1 &&
                  EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr,
                                     block_key_.data(), sealed.iv.data()) == 1 &&
                  EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                    static_cast<int>(aad.size())) == 1 &&
                  EVP_DecryptUpdate(ctx.get(), plain.data(), &len,
                                    sealed.ciphertext.data(),
                                    static_cast<int>(sealed.ciphertext.size())) == 1 &&
                  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG,
                                      static_cast<int>(tag.size()),
                                      tag.data()) == 1;
        if (!ok || EVP_DecryptFinal_ex(ctx.get(), plain.data() + len, &len) != 1) {
            throw AuthenticityError("block " + std::to_string(block.value) +
                                    ": GCM tag mismatch");
        }
        return plain;
    }

    Digest keyed_hash(std::span<const std::uint8_t> data) const override
    {
        Digest inner_digest;
        SHA256_CTX ctx = inner_;
        SHA256_Update(&ctx, data.data(), data.size());
        SHA256_Final(inner_digest.data(), &ctx);
        Digest out;
        ctx = outer_;
        SHA256_Update(&ctx, inner_digest.data(), inner_digest.size());
        SHA256_Final(out.data(), &ctx);
        return out;
    }

private:
    std::array<std::uint8_t, 16> block_key_;
    SHA256_CTX inner_{};
    SHA256_CTX outer_{};
};

constexpr std::uint64_t mix64(std::uint64_t x)
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t load_le64(const std::uint8_t* p, std::size_t n)
{
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        v |= std::uint64_t{p[i]} << (8 * i);
    }
    return v;
}

class FastProvider final : public CryptoProvider {
public:
    explicit FastProvider(const KeyMaterial& keys)
    {
        for (std::size_t lane = 0; lane < 4; ++lane) {
            seed_[lane] = mix64(load_le64(keys.node_key.data() + 8 * lane, 8) + lane);
        }
        block_seed_ = mix64(load_le64(keys.block_key.data(), 8) ^
                            mix64(load_le64(keys.block_key.data() + 8, 8)));
    }

    SealedBlock seal_block(BlockId block, std::span<const std::uint8_t> plaintext,
                           const Iv& iv) const override
    {
        SealedBlock out;
        out.iv = iv;
        out.ciphertext.assign(plaintext.begin(), plaintext.end());
        apply_keystream(block, iv, out.ciphertext);
        out.mac = tag(block, iv, out.ciphertext);
        return out;
    }

    std::vector<std::uint8_t> open_block(BlockId block,
                                         const SealedBlock& sealed) const override
    {
        if (tag(block, sealed.iv, sealed.ciphertext) != sealed.mac) {
            throw AuthenticityError("block " + std::to_string(block.value) +
                                    ": tag mismatch");
        }
        std::vector<std::uint8_t> plain = sealed.ciphertext;
        apply_keystream(block, sealed.iv, plain);
        return plain;
    }

    Digest keyed_hash(std::span<const std::uint8_t> data) const override
    {
        auto lanes = hash_lanes(seed_, data);
        Digest out;
        for (std::size_t lane = 0; lane < 4; ++lane) {
            for (int i = 0; i < 8; ++i) {
                out[8 * lane + i] = static_cast<std::uint8_t>(lanes[lane] >> (8 * i));
            }
        }
        return out;
    }

private:
    static std::array<std::uint64_t, 4>
    hash_lanes(const std::array<std::uint64_t, 4>& seed,
               std::span<const std::uint8_t> data)
    {
        std::array<std::uint64_t, 4> h = seed;
        std::size_t i = 0;
        std::size_t word = 0;
        for (; i < data.size(); i += 8, ++word) {
            std::uint64_t w = load_le64(data.data() + i, std::min<std::size_t>(8, data.size() - i));
            for (std::size_t lane = 0; lane < 4; ++lane) {
                h[lane] = mix64(h[lane] ^ (w + 0x9e3779b97f4a7c15ULL * (word + lane + 1)));
            }
        }
        for (std::size_t lane = 0; lane < 4; ++lane) {
            h[lane] = mix64(h[lane] ^ data.size() ^ h[(lane + 1) % 4]);
        }
        return h;
    }

    Tag tag(BlockId block, const Iv& iv, std::span<const std::uint8_t> ct) const
    {
        std::array<std::uint64_t, 4> seed = seed_;
        seed[0] ^= mix64(block.value + 1);
        seed[1] ^= mix64(load_le64(iv.data(), 8));
        seed[2] ^= mix64(load_le64(iv.data() + 8, 4) + block_seed_);
        auto h = hash_lanes(seed, ct);
        Tag out;
        for (int i = 0; i < 8; ++i) {
            out[i] = static_cast<std::uint8_t>(h[0] >> (8 * i));
            out[8 + i] = static_cast<std::uint8_t>(h[1] >> (8 * i));
        }
        return out;
    }

    void apply_keystream(BlockId block, const Iv& iv, std::vector<std::uint8_t>& buf) const
    {
        std::uint64_t s = mix64(block_seed_ ^ mix64(block.value) ^
                                mix64(load_le64(iv.data(), 8)) ^
                                load_le64(iv.data() + 8, 4));
        for (std::size_t i = 0; i < buf.size(); i += 8) {
            std::uint64_t ks = mix64(s + i);
            for (std::size_t j = 0; j < 8 && i + j < buf.size(); ++j) {
                buf[i + j] ^= static_cast<std::uint8_t>(ks >> (8 * j));
            }
        }
    }

    std::array<std::uint64_t, 4> seed_{};
    std::uint64_t block_seed_ = 0;
};

} // namespace

KeyMaterial KeyMaterial::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open key file " + path.string());
    }
    std::array<char, kFileSize + 1> buf{};
    in.read(buf.data(), buf.size());
    if (in.gcount() != static_cast<std::streamsize>(kFileSize)) {
        throw UsageError("key file " + path.string() + " must be exactly 48 bytes");
    }
    KeyMaterial keys;
    std::memcpy(keys.block_key.data(), buf.data(), 16);
    std::memcpy(keys.node_key.data(), buf.data() + 16, 32);
    if (std::equal(keys.block_key.begin(), keys.block_key.end(), keys.node_key.begin())) {
        throw UsageError("block key and node key must differ");
    }
    return keys;
}

void KeyMaterial::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write key file " + path.string());
    }
    out.write(reinterpret_cast<const char*>(block_key.data()), block_key.size());
    out.write(reinterpret_cast<const char*>(node_key.data()), node_key.size());
    if (!out) {
        throw IoError("short write to key file " + path.string());
    }
}

KeyMaterial KeyMaterial::random()
{
    KeyMaterial keys;
    if (RAND_bytes(keys.block_key.data(), static_cast<int>(keys.block_key.size())) != 1 ||
        RAND_bytes(keys.node_key.data(), static_cast<int>(keys.node_key.size())) != 1) {
        throw Error("RAND_bytes failed");
    }
    return keys;
}

KeyMaterial KeyMaterial::from_seed(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    KeyMaterial keys;
    for (auto& b : keys.block_key) {
        b = static_cast<std::uint8_t>(rng());
    }
    for (auto& b : keys.node_key) {
        b = static_cast<std::uint8_t>(rng());
    }
    return keys;
}

Digest CryptoProvider::node_digest(std::span<const Digest> children) const
{
    if (children.size() < 2) {
        throw UsageError("node digest needs at least two children");
    }
    static_assert(sizeof(Digest) == kDigestSize);
    return keyed_hash({reinterpret_cast<const std::uint8_t*>(children.data()),
                       children.size() * kDigestSize});
}

Digest CryptoProvider::leaf_digest(const SealedBlock& sealed)
{
    return leaf_digest(sealed.mac);
}

Digest CryptoProvider::leaf_digest(const Tag& mac)
{
    Digest d{};
    std::copy(mac.begin(), mac.end(), d.begin());
    return d;
}

Tag CryptoProvider::mac_of(const Digest& leaf)
{
    Tag t{};
    std::copy_n(leaf.begin(), t.size(), t.begin());
    return t;
}

std::unique_ptr<CryptoProvider> make_openssl_provider(const KeyMaterial& keys)
{
    return std::make_unique<OpenSslProvider>(keys);
}

std::unique_ptr<CryptoProvider> make_fast_provider(const KeyMaterial& keys)
{
    return std::make_unique<FastProvider>(keys);
}

} // namespace dmt

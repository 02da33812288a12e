#include "dmt/engine.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace dmt {

namespace {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_paths(const EngineConfig& c)
{
    const auto& l = c.layout;
    if (c.anchor_path.empty()) {
        throw UsageError("an anchor path is required");
    }
    if (c.anchor_path == l.data_path || c.anchor_path == l.meta_path) {
        throw UsageError("the anchor must not share a file with data or metadata");
    }
}

} // namespace

OpCounters OpCounters::operator-(const OpCounters& r) const
{
    OpCounters o;
    o.node_hashes_computed = node_hashes_computed - r.node_hashes_computed;
    o.bytes_hashed = bytes_hashed - r.bytes_hashed;
    o.cache_hits = cache_hits - r.cache_hits;
    o.cache_misses = cache_misses - r.cache_misses;
    o.meta_reads = meta_reads - r.meta_reads;
    o.meta_writes = meta_writes - r.meta_writes;
    o.data_reads = data_reads - r.data_reads;
    o.data_writes = data_writes - r.data_writes;
    o.splays_performed = splays_performed - r.splays_performed;
    o.rotations_performed = rotations_performed - r.rotations_performed;
    o.auth_hashes = auth_hashes - r.auth_hashes;
    o.update_hashes = update_hashes - r.update_hashes;
    o.splay_hashes = splay_hashes - r.splay_hashes;
    o.block_seals = block_seals - r.block_seals;
    o.block_opens = block_opens - r.block_opens;
    return o;
}

std::vector<std::pair<const char*, std::uint64_t>> OpCounters::fields() const
{
    return {
        {"node_hashes_computed", node_hashes_computed},
        {"bytes_hashed", bytes_hashed},
        {"cache_hits", cache_hits},
        {"cache_misses", cache_misses},
        {"meta_reads", meta_reads},
        {"meta_writes", meta_writes},
        {"data_reads", data_reads},
        {"data_writes", data_writes},
        {"splays_performed", splays_performed},
        {"rotations_performed", rotations_performed},
        {"auth_hashes", auth_hashes},
        {"update_hashes", update_hashes},
        {"splay_hashes", splay_hashes},
        {"block_seals", block_seals},
        {"block_opens", block_opens},
    };
}

RootAnchor AnchorFile::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open anchor " + path.string());
    }
    std::array<std::uint8_t, kSize + 1> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (static_cast<std::size_t>(in.gcount()) != kSize) {
        throw IoError("anchor " + path.string() + " is not " + std::to_string(kSize) + " bytes");
    }
    RootAnchor a;
    std::memcpy(a.digest.data(), buf.data(), a.digest.size());
    for (int i = 0; i < 8; ++i) {
        a.generation |= std::uint64_t{buf[32 + i]} << (8 * i);
    }
    return a;
}

void AnchorFile::save(const std::filesystem::path& path, const RootAnchor& anchor)
{
    std::array<std::uint8_t, kSize> buf{};
    std::memcpy(buf.data(), anchor.digest.data(), anchor.digest.size());
    for (int i = 0; i < 8; ++i) {
        buf[32 + i] = static_cast<std::uint8_t>(anchor.generation >> (8 * i));
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
        if (!out) {
            throw IoError("cannot write anchor " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot replace anchor " + path.string() + ": " + ec.message());
    }
}

Engine::Engine(EngineConfig config, UntrustedStore store, std::unique_ptr<Topology> topo,
               std::unique_ptr<CryptoProvider> crypto, RootAnchor anchor)
    : config_(std::move(config)),
      store_(std::move(store)),
      topo_(std::move(topo)),
      crypto_(std::move(crypto)),
      cache_(SecureCache::capacity_for(config_.cache_ratio, topo_->node_count())),
      anchor_(anchor),
      iv_rng_(mix64(config_.iv_seed ^ mix64(anchor.generation)))
{
    store_.set_device_latency(config_.device_latency);
    store_.enable_tamper(config_.tamper_mode);
}

Engine::~Engine() = default;

std::unique_ptr<Engine> Engine::initialize(EngineConfig config, std::unique_ptr<Topology> topo,
                                           std::unique_ptr<CryptoProvider> crypto, bool force)
{
    check_paths(config);
    if (!topo || !crypto) {
        throw UsageError("engine needs a topology and a crypto provider");
    }
    if (topo->n_blocks() != config.layout.n_blocks) {
        throw UsageError("topology and layout disagree on the block count");
    }
    config.layout.max_nodes = topo->node_count();
    auto store = UntrustedStore::create(config.layout, force);

    const std::uint64_t total = topo->node_count();
    std::vector<NodeRecord> recs(total);
    std::array<Digest, kMaxArity> kids{};
    for (NodeId n : topo->bottom_up_order()) {
        NodeRecord& r = recs[n.value];
        r.flags = topo->flags_of(n);
        if (topo->stores_pointers()) {
            r.parent = topo->parent(n);
            ChildList c = topo->children(n);
            if (c.size() == 2) {
                r.left = c[0];
                r.right = c[1];
            }
        }
        if (!topo->is_leaf(n)) {
            ChildList c = topo->children(n);
            for (std::size_t i = 0; i < c.size(); ++i) {
                kids[i] = recs[c[i].value].digest;
            }
            r.digest = crypto->node_digest({kids.data(), c.size()});
        }
    }
    store.write_nodes(NodeId{0}, recs);
    RootAnchor anchor{recs[topo->root().value].digest, 0};
    AnchorFile::save(config.anchor_path, anchor);

    std::unique_ptr<Engine> e(
        new Engine(std::move(config), std::move(store), std::move(topo), std::move(crypto), anchor));
    e->reset_counters();
    return e;
}

std::unique_ptr<Engine> Engine::open(EngineConfig config, std::unique_ptr<Topology> topo,
                                     std::unique_ptr<CryptoProvider> crypto)
{
    check_paths(config);
    if (!topo || !crypto) {
        throw UsageError("engine needs a topology and a crypto provider");
    }
    if (topo->n_blocks() != config.layout.n_blocks) {
        throw UsageError("topology and layout disagree on the block count");
    }
    config.layout.max_nodes = topo->node_count();
    auto store = UntrustedStore::open(config.layout);
    RootAnchor anchor = AnchorFile::load(config.anchor_path);
    if (topo->stores_pointers()) {
        auto recs = store.read_nodes(NodeId{0}, topo->node_count(), false);
        topo->load_pointers(recs);
    }
    std::unique_ptr<Engine> e(
        new Engine(std::move(config), std::move(store), std::move(topo), std::move(crypto), anchor));
    if (e->topo_->stores_pointers()) {
        // The shape came from untrusted metadata; it is only usable if it
        // reproduces the trusted root.
        std::vector<NodeId> bad;
        auto digests = e->recompute_all(&bad);
        const Digest& root = digests[e->topo_->root().value];
        if (!bad.empty() || root != anchor.digest) {
            IntegrityReport r;
            r.node = bad.empty() ? e->topo_->root() : bad.front();
            r.expected = anchor.digest;
            r.computed = root;
            r.what = "metadata does not reproduce the trusted root";
            throw IntegrityError(r);
        }
    }
    e->reset_counters();
    return e;
}

// ---- bookkeeping ---------------------------------------------------------

RootAnchor Engine::anchor() const
{
    std::lock_guard lock(mu_);
    return anchor_;
}

OpCounters Engine::counters() const
{
    std::lock_guard lock(mu_);
    OpCounters raw = counters_;
    raw.meta_reads = store_.stats().meta_reads;
    raw.meta_writes = store_.stats().meta_writes;
    raw.data_reads = store_.stats().data_reads;
    raw.data_writes = store_.stats().data_writes;
    raw.cache_hits = cache_.hits();
    raw.cache_misses = cache_.misses();
    return raw - baseline_;
}

void Engine::reset_counters()
{
    std::lock_guard lock(mu_);
    baseline_ = counters_;
    baseline_.meta_reads = store_.stats().meta_reads;
    baseline_.meta_writes = store_.stats().meta_writes;
    baseline_.data_reads = store_.stats().data_reads;
    baseline_.data_writes = store_.stats().data_writes;
    baseline_.cache_hits = cache_.hits();
    baseline_.cache_misses = cache_.misses();
}

Iv Engine::next_iv()
{
    Iv iv{};
    std::uint64_t a = iv_rng_();
    std::uint64_t b = iv_rng_();
    std::memcpy(iv.data(), &a, 8);
    std::memcpy(iv.data() + 8, &b, 4);
    return iv;
}

NodeRecord Engine::make_record(NodeId node, const Digest& digest, const Iv& iv,
                               std::int64_t hotness) const
{
    NodeRecord r;
    r.digest = digest;
    r.iv = iv;
    r.hotness = hotness;
    r.flags = topo_->flags_of(node);
    if (topo_->stores_pointers()) {
        r.parent = topo_->parent(node);
        ChildList c = topo_->children(node);
        if (c.size() == 2) {
            r.left = c[0];
            r.right = c[1];
        }
    }
    return r;
}

void Engine::write_back(const CacheEntry& e)
{
    Iv iv = e.iv;
    if (!e.has_iv && topo_->is_leaf(e.node)) {
        // Keep whatever iv is on disk; it is checked by the AEAD on open.
        iv = store_.read_node(e.node).iv;
    }
    store_.write_node(e.node, make_record(e.node, e.digest, iv, e.hotness));
}

void Engine::absorb(std::optional<CacheEntry> victim)
{
    if (victim && victim->dirty) {
        write_back(*victim);
    }
}

std::size_t Engine::flush_locked()
{
    std::size_t n = cache_.flush_dirty([this](const CacheEntry& e) { write_back(e); });
    if (root_dirty_) {
        NodeId root = topo_->root();
        Iv iv{};
        if (topo_->is_leaf(root)) {
            iv = store_.read_node(root).iv;
        }
        store_.write_node(root, make_record(root, anchor_.digest, iv, 0));
        root_dirty_ = false;
        ++n;
    }
    AnchorFile::save(config_.anchor_path, anchor_);
    return n;
}

std::size_t Engine::flush()
{
    std::lock_guard lock(mu_);
    return flush_locked();
}

void Engine::clear_cache()
{
    std::lock_guard lock(mu_);
    flush_locked();
    cache_.clear();
}

// ---- verification --------------------------------------------------------

void Engine::begin_op(BlockId block)
{
    op_block_ = block;
    local_.clear();
    fetched_.clear();
    rehashed_.clear();
}

std::optional<Digest> Engine::lookup_trusted(NodeId node)
{
    if (node == topo_->root()) {
        return anchor_.digest;
    }
    if (auto it = local_.find(node); it != local_.end()) {
        return it->second;
    }
    if (const CacheEntry* e = cache_.get(node)) {
        local_[node] = e->digest;
        return e->digest;
    }
    return std::nullopt;
}

const NodeRecord& Engine::fetch(NodeId node)
{
    auto it = fetched_.find(node);
    if (it == fetched_.end()) {
        it = fetched_.emplace(node, store_.read_node(node)).first;
    }
    return it->second;
}

Digest Engine::hash_node(std::span<const Digest> kids, std::uint64_t& bucket)
{
    ++counters_.node_hashes_computed;
    counters_.bytes_hashed += kids.size() * kDigestSize;
    ++bucket;
    return crypto_->node_digest(kids);
}

void Engine::fail(NodeId node, unsigned level, const Digest& expected, const Digest& computed,
                  std::string what)
{
    IntegrityReport r;
    r.block = op_block_;
    r.node = node;
    r.level = level;
    r.expected = expected;
    r.computed = computed;
    r.what = std::move(what);
    throw IntegrityError(std::move(r));
}

void Engine::verify_chain(NodeId start, const Digest& start_digest, const Iv* start_iv)
{
    std::vector<std::pair<NodeId, Digest>> fresh{{start, start_digest}};
    if (start == topo_->root()) {
        if (start_digest != anchor_.digest) {
            fail(start, 0, anchor_.digest, start_digest, "root does not match anchor");
        }
        return;
    }
    std::array<Digest, kMaxArity> kids{};
    NodeId cur = start;
    Digest cur_d = start_digest;
    unsigned level = 0;
    while (true) {
        NodeId p = topo_->parent(cur);
        ChildList c = topo_->children(p);
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] == cur) {
                kids[i] = cur_d;
            } else if (auto t = lookup_trusted(c[i])) {
                kids[i] = *t;
            } else {
                kids[i] = fetch(c[i]).digest;
                fresh.emplace_back(c[i], kids[i]);
            }
        }
        Digest h = hash_node({kids.data(), c.size()}, counters_.auth_hashes);
        ++level;
        if (auto t = lookup_trusted(p)) {
            if (*t != h) {
                fail(p, level,
                     *t, h, p == topo_->root() ? "root does not match anchor"
                                               : "digest differs from trusted copy");
            }
            break;
        }
        const Digest& stored = fetch(p).digest;
        if (stored != h) {
            fail(p, level, stored, h, "stored digest differs from its children");
        }
        fresh.emplace_back(p, h);
        cur = p;
        cur_d = h;
    }
    for (const auto& [n, d] : fresh) {
        local_[n] = d;
        absorb(cache_.insert_authenticated(n, d, n == start ? start_iv : nullptr));
    }
}

void Engine::ensure_siblings(NodeId leaf)
{
    auto first_missing = [&]() -> NodeId {
        for (NodeId cur = leaf, p = topo_->parent(cur); p != kNoNode;
             cur = p, p = topo_->parent(p)) {
            for (NodeId c : topo_->children(p)) {
                if (c != cur && !lookup_trusted(c)) {
                    return c;
                }
            }
        }
        return kNoNode;
    };
    NodeId missing = first_missing();
    if (missing == kNoNode) {
        return;
    }
    // One chain from the leaf covers every sibling below the first trusted
    // ancestor; anything above it is authenticated on its own.
    if (!lookup_trusted(leaf)) {
        verify_chain(leaf, fetch(leaf).digest, nullptr);
    }
    while ((missing = first_missing()) != kNoNode) {
        verify_chain(missing, fetch(missing).digest, nullptr);
    }
}

void Engine::update_path(NodeId leaf, const Digest& leaf_digest, const Iv& iv)
{
    local_[leaf] = leaf_digest;
    if (leaf == topo_->root()) {
        anchor_.digest = leaf_digest;
        root_dirty_ = true;
    } else {
        absorb(cache_.put_dirty(leaf, leaf_digest, &iv));
    }
    std::array<Digest, kMaxArity> kids{};
    for (NodeId cur = leaf, p = topo_->parent(cur); p != kNoNode; cur = p, p = topo_->parent(p)) {
        ChildList c = topo_->children(p);
        for (std::size_t i = 0; i < c.size(); ++i) {
            auto it = local_.find(c[i]);
            if (it == local_.end()) {
                throw std::logic_error("update reached an unauthenticated sibling");
            }
            kids[i] = it->second;
        }
        Digest h = hash_node({kids.data(), c.size()}, counters_.update_hashes);
        local_[p] = h;
        if (p == topo_->root()) {
            anchor_.digest = h;
            root_dirty_ = true;
        } else {
            absorb(cache_.put_dirty(p, h));
        }
    }
}

std::vector<std::uint8_t> Engine::read_locked(BlockId block)
{
    begin_op(block);
    NodeId leaf = topo_->leaf_of(block);
    Digest leaf_d;
    Iv iv{};
    bool trusted = false;
    bool iv_known = false;
    if (leaf == topo_->root()) {
        leaf_d = anchor_.digest;
        iv = fetch(leaf).iv;
        trusted = true;
    } else if (const CacheEntry* e = cache_.get(leaf)) {
        leaf_d = e->digest;
        trusted = true;
        iv_known = e->has_iv;
        iv = iv_known ? e->iv : fetch(leaf).iv;
        local_[leaf] = leaf_d;
    } else {
        const NodeRecord& r = fetch(leaf);
        leaf_d = r.digest;
        iv = r.iv;
    }

    std::vector<std::uint8_t> plain;
    const bool written = !is_zero(leaf_d);
    if (!written) {
        plain.assign(block_size(), 0);
    } else {
        SealedBlock sealed{store_.read_block_raw(block), iv, CryptoProvider::mac_of(leaf_d)};
        ++counters_.block_opens;
        try {
            plain = crypto_->open_block(block, sealed);
        } catch (const AuthenticityError&) {
            fail(leaf, 0, leaf_d, Digest{}, "block does not match its MAC");
        }
    }
    if (!trusted) {
        verify_chain(leaf, leaf_d, written ? &iv : nullptr);
    } else if (written && !iv_known) {
        cache_.set_iv(leaf, iv);
    }
    topo_->post_access(leaf, *this);
    return plain;
}

std::uint64_t Engine::write_locked(BlockId block, std::span<const std::uint8_t> plaintext)
{
    if (plaintext.size() != block_size()) {
        throw UsageError("write must be exactly one block");
    }
    begin_op(block);
    NodeId leaf = topo_->leaf_of(block);
    ensure_siblings(leaf);
    Iv iv = next_iv();
    SealedBlock sealed = crypto_->seal_block(block, plaintext, iv);
    ++counters_.block_seals;
    store_.write_block_raw(block, sealed.ciphertext);
    update_path(leaf, CryptoProvider::leaf_digest(sealed), iv);
    ++anchor_.generation;
    topo_->post_access(leaf, *this);
    return anchor_.generation;
}

std::vector<std::uint8_t> Engine::read_verified(BlockId block)
{
    std::lock_guard lock(mu_);
    return read_locked(block);
}

std::uint64_t Engine::write_authenticated(BlockId block, std::span<const std::uint8_t> plaintext)
{
    std::lock_guard lock(mu_);
    return write_locked(block, plaintext);
}

IoResult Engine::io(const WorkloadOp& op, std::span<std::uint8_t> buffer)
{
    if (!buffer.empty() && buffer.size() != op.length) {
        throw UsageError("I/O buffer must match the request length");
    }
    auto t0 = std::chrono::steady_clock::now();
    std::lock_guard lock(mu_);
    const std::uint32_t bs = block_size();
    auto blocks = blocks_for_io(op.offset, op.length, bs, capacity_bytes());
    const std::uint64_t hashes0 = counters_.node_hashes_computed;
    const std::uint64_t updates0 = counters_.update_hashes;
    std::vector<std::uint8_t> plain(bs);
    for (BlockId b : blocks) {
        const std::uint64_t start = b.value * bs;
        const std::uint64_t lo = std::max(op.offset, start);
        const std::uint64_t hi = std::min(op.offset + op.length, start + bs);
        if (op.kind == OpKind::read) {
            auto data = read_locked(b);
            if (!buffer.empty()) {
                std::copy(data.begin() + (lo - start), data.begin() + (hi - start),
                          buffer.begin() + (lo - op.offset));
            }
            continue;
        }
        if (lo == start && hi == start + bs) {
            if (!buffer.empty()) {
                std::copy_n(buffer.begin() + (lo - op.offset), bs, plain.begin());
            } else {
                std::fill(plain.begin(), plain.end(),
                          static_cast<std::uint8_t>(anchor_.generation));
                std::memcpy(plain.data(), &anchor_.generation, sizeof(anchor_.generation));
            }
        } else {
            plain = read_locked(b);
            if (!buffer.empty()) {
                std::copy(buffer.begin() + (lo - op.offset), buffer.begin() + (hi - op.offset),
                          plain.begin() + (lo - start));
            } else {
                std::fill(plain.begin() + (lo - start), plain.begin() + (hi - start),
                          static_cast<std::uint8_t>(anchor_.generation));
            }
        }
        write_locked(b, plain);
    }
    IoResult r;
    r.blocks = blocks.size();
    r.hashes = counters_.node_hashes_computed - hashes0;
    r.update_hashes = counters_.update_hashes - updates0;
    r.latency_ns = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
            .count());
    return r;
}

// ---- full recomputation --------------------------------------------------

std::vector<Digest> Engine::recompute_all(std::vector<NodeId>* bad)
{
    auto recs = store_.read_nodes(NodeId{0}, topo_->node_count(), false);
    std::vector<Digest> computed(recs.size());
    std::array<Digest, kMaxArity> kids{};
    for (NodeId n : topo_->bottom_up_order()) {
        if (topo_->is_leaf(n)) {
            computed[n.value] = recs[n.value].digest;
            continue;
        }
        ChildList c = topo_->children(n);
        for (std::size_t i = 0; i < c.size(); ++i) {
            kids[i] = computed[c[i].value];
        }
        computed[n.value] = crypto_->node_digest({kids.data(), c.size()});
        if (computed[n.value] != recs[n.value].digest && bad) {
            bad->push_back(n);
        }
    }
    return computed;
}

Digest Engine::recompute_root_full()
{
    std::lock_guard lock(mu_);
    std::vector<NodeId> bad;
    auto computed = recompute_all(&bad);
    if (!bad.empty()) {
        return Digest{};
    }
    return computed[topo_->root().value];
}

std::vector<NodeId> Engine::inconsistent_nodes()
{
    std::lock_guard lock(mu_);
    std::vector<NodeId> bad;
    recompute_all(&bad);
    return bad;
}

// ---- splay host ----------------------------------------------------------

bool Engine::cached(NodeId node)
{
    return cache_.contains(node);
}

std::int64_t Engine::hotness(NodeId node)
{
    const CacheEntry* e = cache_.peek(node);
    return e ? e->hotness : 0;
}

void Engine::adjust_hotness(NodeId node, std::int64_t delta)
{
    cache_.adjust_hotness(node, delta);
}

void Engine::authenticate_path(NodeId leaf)
{
    ensure_siblings(leaf);
}

void Engine::rehash(NodeId node)
{
    std::array<Digest, kMaxArity> kids{};
    ChildList c = topo_->children(node);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto it = local_.find(c[i]);
        if (it == local_.end()) {
            throw std::logic_error("rehash reached an unauthenticated child");
        }
        kids[i] = it->second;
    }
    local_[node] = hash_node({kids.data(), c.size()}, counters_.splay_hashes);
    rehashed_.insert(node);
}

void Engine::commit_restructure(std::span<const NodeId> touched, unsigned rotations)
{
    std::vector<NodeId> all(touched.begin(), touched.end());
    all.insert(all.end(), rehashed_.begin(), rehashed_.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    const NodeId root = topo_->root();
    for (NodeId n : all) {
        auto it = local_.find(n);
        if (it == local_.end()) {
            throw std::logic_error("restructure touched an unauthenticated node");
        }
        if (n == root) {
            anchor_.digest = it->second;
            root_dirty_ = true;
            cache_.erase(n);
        } else {
            absorb(cache_.put_dirty(n, it->second));
        }
    }
    ++anchor_.generation;
    ++counters_.splays_performed;
    counters_.rotations_performed += rotations;
    rehashed_.clear();
}

} // namespace dmt

#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dmt/crypto.hpp"
#include "dmt/types.hpp"

namespace dmt {

/// A node copy held in trusted memory. Present only after authentication.
struct CacheEntry {
    NodeId node = kNoNode;
    Digest digest{};
    Iv iv{};
    bool has_iv = false; // leaves: iv known to match digest
    std::int64_t hotness = 0;
    bool dirty = false;
};

/// Trusted LRU cache with write-back. Not internally synchronized.
class SecureCache {
public:
    explicit SecureCache(std::size_t capacity);

    /// ceil(ratio * total_nodes), at least 1.
    static std::size_t capacity_for(double ratio, std::uint64_t total_nodes);

    /// Hit refreshes recency. Counts a hit or a miss.
    const CacheEntry* get(NodeId node);
    /// Lookup without touching recency or counters.
    const CacheEntry* peek(NodeId node) const;
    bool contains(NodeId node) const { return index_.count(node) != 0; }

    /// Inserts a freshly authenticated clean copy. An existing entry keeps its
    /// hotness and dirty state and only has its recency refreshed. Returns the
    /// evicted victim, if any; the caller must write it back when dirty.
    std::optional<CacheEntry> insert_authenticated(NodeId node, const Digest& digest,
                                                   const Iv* iv = nullptr);

    /// Records a new trusted value and marks it dirty.
    std::optional<CacheEntry> put_dirty(NodeId node, const Digest& digest,
                                        const Iv* iv = nullptr);

    /// Fills in a verified iv for a cached leaf.
    void set_iv(NodeId node, const Iv& iv);

    /// hotness := max(0, hotness + delta). Misses are ignored.
    std::optional<std::int64_t> adjust_hotness(NodeId node, std::int64_t delta);

    /// Drops an entry without writing it back.
    void erase(NodeId node);

    /// Hands every dirty entry to `sink` and clears the dirty flags.
    std::size_t flush_dirty(const std::function<void(const CacheEntry&)>& sink);

    /// Drops every entry. Callers flush first.
    void clear();

    std::size_t size() const { return index_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    double miss_rate() const;

    /// Most recently used first.
    std::vector<NodeId> recency_order() const;

private:
    using List = std::list<CacheEntry>;

    CacheEntry& touch(List::iterator it);
    std::optional<CacheEntry> make_room();

    std::size_t capacity_;
    List lru_; // front = most recent
    std::unordered_map<NodeId, List::iterator> index_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

} // namespace dmt

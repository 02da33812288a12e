#include "dmt/secure_cache.hpp"

#include <algorithm>
#include <cmath>

namespace dmt {

SecureCache::SecureCache(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1))
{
    index_.reserve(capacity_ + 1);
}

std::size_t SecureCache::capacity_for(double ratio, std::uint64_t total_nodes)
{
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw UsageError("cache ratio must be in (0, 1]");
    }
    auto cap = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(total_nodes)));
    return std::max<std::size_t>(cap, 1);
}

CacheEntry& SecureCache::touch(List::iterator it)
{
    lru_.splice(lru_.begin(), lru_, it);
    return *it;
}

const CacheEntry* SecureCache::get(NodeId node)
{
    auto it = index_.find(node);
    if (it == index_.end()) {
        ++misses_;
        return nullptr;
    }
    ++hits_;
    return &touch(it->second);
}

const CacheEntry* SecureCache::peek(NodeId node) const
{
    auto it = index_.find(node);
    return it == index_.end() ? nullptr : &*it->second;
}

std::optional<CacheEntry> SecureCache::make_room()
{
    if (index_.size() < capacity_) {
        return std::nullopt;
    }
    CacheEntry victim = std::move(lru_.back());
    lru_.pop_back();
    index_.erase(victim.node);
    return victim;
}

std::optional<CacheEntry> SecureCache::insert_authenticated(NodeId node, const Digest& digest,
                                                            const Iv* iv)
{
    auto it = index_.find(node);
    if (it != index_.end()) {
        CacheEntry& e = touch(it->second);
        if (iv && !e.has_iv && e.digest == digest) {
            e.iv = *iv;
            e.has_iv = true;
        }
        return std::nullopt;
    }
    auto victim = make_room();
    CacheEntry e;
    e.node = node;
    e.digest = digest;
    if (iv) {
        e.iv = *iv;
        e.has_iv = true;
    }
    lru_.push_front(e);
    index_.emplace(node, lru_.begin());
    return victim;
}

std::optional<CacheEntry> SecureCache::put_dirty(NodeId node, const Digest& digest, const Iv* iv)
{
    auto it = index_.find(node);
    if (it != index_.end()) {
        CacheEntry& e = touch(it->second);
        e.digest = digest;
        e.dirty = true;
        if (iv) {
            e.iv = *iv;
            e.has_iv = true;
        }
        return std::nullopt;
    }
    auto victim = make_room();
    CacheEntry e;
    e.node = node;
    e.digest = digest;
    e.dirty = true;
    if (iv) {
        e.iv = *iv;
        e.has_iv = true;
    }
    lru_.push_front(e);
    index_.emplace(node, lru_.begin());
    return victim;
}

void SecureCache::set_iv(NodeId node, const Iv& iv)
{
    auto it = index_.find(node);
    if (it != index_.end()) {
        it->second->iv = iv;
        it->second->has_iv = true;
    }
}

std::optional<std::int64_t> SecureCache::adjust_hotness(NodeId node, std::int64_t delta)
{
    auto it = index_.find(node);
    if (it == index_.end()) {
        return std::nullopt;
    }
    auto& h = it->second->hotness;
    h = std::max<std::int64_t>(0, h + delta);
    return h;
}

void SecureCache::erase(NodeId node)
{
    auto it = index_.find(node);
    if (it != index_.end()) {
        lru_.erase(it->second);
        index_.erase(it);
    }
}

std::size_t SecureCache::flush_dirty(const std::function<void(const CacheEntry&)>& sink)
{
    std::size_t n = 0;
    for (auto& e : lru_) {
        if (e.dirty) {
            sink(e);
            e.dirty = false;
            ++n;
        }
    }
    return n;
}

void SecureCache::clear()
{
    lru_.clear();
    index_.clear();
}

double SecureCache::miss_rate() const
{
    auto total = hits_ + misses_;
    return total == 0 ? 0.0 : static_cast<double>(misses_) / static_cast<double>(total);
}

std::vector<NodeId> SecureCache::recency_order() const
{
    std::vector<NodeId> out;
    out.reserve(lru_.size());
    for (const auto& e : lru_) {
        out.push_back(e.node);
    }
    return out;
}

} // namespace dmt

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sinklab {

// Per-layer key/value cache with three eviction policies. Dense keeps every
// entry; Window keeps the last W; Sink pins the first S entries forever and
// keeps the most recent R after them. Keys are stored un-rotated and receive
// their rotary encoding at attention time from the cache-relative position,
// which changes as entries shift.

enum class PolicyKind { Dense, Window, Sink };

class CachePolicy {
public:
    static CachePolicy dense();
    static CachePolicy window(std::size_t window_len);
    static CachePolicy sink(std::size_t sink_len, std::size_t recent_len);

    PolicyKind kind() const { return kind_; }
    bool bounded() const { return kind_ != PolicyKind::Dense; }
    /// Capacity in entries; only meaningful for bounded policies.
    std::size_t capacity() const;
    std::size_t window_len() const { return window_len_; }
    std::size_t sink_len() const { return sink_len_; }
    std::size_t recent_len() const { return recent_len_; }

    std::string describe() const;

    bool operator==(const CachePolicy&) const = default;

    /// Parses "dense", "window(W=8)", "sink(S=4,R=60)".
    static CachePolicy parse(const std::string& text);

private:
    CachePolicy() = default;
    PolicyKind kind_ = PolicyKind::Dense;
    std::size_t window_len_ = 0;
    std::size_t sink_len_ = 0;
    std::size_t recent_len_ = 0;
};

struct KvEntry {
    std::vector<double> key;
    std::vector<double> value;
    std::int64_t original_pos = 0;
};

class KvCache {
public:
    KvCache(CachePolicy policy, std::size_t d_head);

    /// Stores the entry, then evicts per policy. Positions must be strictly
    /// increasing across appends.
    void append(std::vector<double> key, std::vector<double> value, std::int64_t original_pos);

    /// Cache-relative positions: 0..len-1 in stored order for Window and
    /// Sink, original positions for Dense.
    std::vector<std::int64_t> cache_positions() const;

    /// Original positions currently stored, in stored order.
    std::vector<std::int64_t> retained_original_positions() const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const KvEntry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t d_head() const { return d_head_; }
    const CachePolicy& policy() const { return policy_; }

private:
    CachePolicy policy_;
    std::size_t d_head_;
    std::vector<KvEntry> entries_;
    std::int64_t max_pos_seen_ = -1;
    std::int64_t append_count_ = 0;
};

/// Scaled dot-product attention over the cache. Rope is applied to the query
/// at query_cache_pos and to each key at its cache-relative position.
std::vector<double> attend(const std::vector<double>& query, std::int64_t query_cache_pos,
                           const KvCache& cache, double rope_base = 10000.0);

/// One container of per-(layer, head) caches sharing a single policy;
/// appends happen in lockstep so eviction stays synchronized.
class KvCacheSet {
public:
    KvCacheSet(std::size_t n_layers, std::size_t n_heads, std::size_t d_head, CachePolicy policy);
    /// Adopts existing caches; rejects mixed policies.
    KvCacheSet(std::vector<KvCache> caches, std::size_t n_layers, std::size_t n_heads);

    KvCache& at(std::size_t layer, std::size_t head);
    const KvCache& at(std::size_t layer, std::size_t head) const;
    std::size_t n_layers() const { return n_layers_; }
    std::size_t n_heads() const { return n_heads_; }
    const CachePolicy& policy() const { return caches_.front().policy(); }

private:
    std::size_t n_layers_;
    std::size_t n_heads_;
    std::vector<KvCache> caches_;
};

} // namespace sinklab

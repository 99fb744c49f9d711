#include "sinklab/kvcache.hpp"

#include "sinklab/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sinklab {

CachePolicy CachePolicy::dense() {
    CachePolicy p;
    p.kind_ = PolicyKind::Dense;
    return p;
}

CachePolicy CachePolicy::window(std::size_t window_len) {
    if (window_len < 1) throw std::invalid_argument("window policy requires W >= 1");
    CachePolicy p;
    p.kind_ = PolicyKind::Window;
    p.window_len_ = window_len;
    return p;
}

CachePolicy CachePolicy::sink(std::size_t sink_len, std::size_t recent_len) {
    if (recent_len < 1) throw std::invalid_argument("sink policy requires R >= 1");
    CachePolicy p;
    p.kind_ = PolicyKind::Sink;
    p.sink_len_ = sink_len;
    p.recent_len_ = recent_len;
    return p;
}

std::size_t CachePolicy::capacity() const {
    switch (kind_) {
    case PolicyKind::Dense: throw std::logic_error("dense cache is unbounded");
    case PolicyKind::Window: return window_len_;
    case PolicyKind::Sink: return sink_len_ + recent_len_;
    }
    throw std::logic_error("unreachable");
}

std::string CachePolicy::describe() const {
    char buf[64];
    switch (kind_) {
    case PolicyKind::Dense: return "dense";
    case PolicyKind::Window:
        std::snprintf(buf, sizeof(buf), "window(W=%zu)", window_len_);
        return buf;
    case PolicyKind::Sink:
        std::snprintf(buf, sizeof(buf), "sink(S=%zu,R=%zu)", sink_len_, recent_len_);
        return buf;
    }
    throw std::logic_error("unreachable");
}

CachePolicy CachePolicy::parse(const std::string& text) {
    if (text == "dense") return dense();
    std::size_t w = 0, s = 0, r = 0;
    if (std::sscanf(text.c_str(), "window(W=%zu)", &w) == 1) return window(w);
    if (std::sscanf(text.c_str(), "sink(S=%zu,R=%zu)", &s, &r) == 2) return sink(s, r);
    throw std::invalid_argument("unrecognized cache policy: " + text);
}

KvCache::KvCache(CachePolicy policy, std::size_t d_head) : policy_(policy), d_head_(d_head) {
    if (d_head == 0) throw std::invalid_argument("d_head must be >= 1");
}

void KvCache::append(std::vector<double> key, std::vector<double> value,
                     std::int64_t original_pos) {
    if (key.size() != d_head_ || value.size() != d_head_) {
        throw std::invalid_argument("kv entry dimension does not match cache d_head");
    }
    if (original_pos <= max_pos_seen_) {
        throw std::invalid_argument("append position " + std::to_string(original_pos) +
                                    " is not greater than stored maximum " +
                                    std::to_string(max_pos_seen_));
    }
    max_pos_seen_ = original_pos;
    ++append_count_;
    entries_.push_back({std::move(key), std::move(value), original_pos});

    switch (policy_.kind()) {
    case PolicyKind::Dense: break;
    case PolicyKind::Window:
        while (entries_.size() > policy_.window_len()) entries_.erase(entries_.begin());
        break;
    case PolicyKind::Sink:
        // Sinks (the first S appended) are permanent; evict the oldest
        // non-sink entry until the cache fits.
        while (entries_.size() > policy_.capacity()) {
            entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(policy_.sink_len()));
        }
        break;
    }
}

std::vector<std::int64_t> KvCache::cache_positions() const {
    std::vector<std::int64_t> pos(entries_.size());
    if (policy_.kind() == PolicyKind::Dense) {
        for (std::size_t i = 0; i < entries_.size(); ++i) pos[i] = entries_[i].original_pos;
    } else {
        for (std::size_t i = 0; i < entries_.size(); ++i) pos[i] = static_cast<std::int64_t>(i);
    }
    return pos;
}

std::vector<std::int64_t> KvCache::retained_original_positions() const {
    std::vector<std::int64_t> pos(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) pos[i] = entries_[i].original_pos;
    return pos;
}

std::vector<double> attend(const std::vector<double>& query, std::int64_t query_cache_pos,
                           const KvCache& cache, double rope_base) {
    if (cache.empty()) throw std::invalid_argument("attend: cache is empty");
    if (query.size() != cache.d_head()) throw std::invalid_argument("attend: query dim mismatch");

    const auto positions = cache.cache_positions();
    for (std::int64_t p : positions) {
        if (query_cache_pos < p) {
            throw std::invalid_argument("attend: query position precedes a cached position");
        }
    }

    const std::size_t d = cache.d_head();
    const auto q = rope_apply(query, query_cache_pos, rope_base);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<double> scores(cache.size());
    for (std::size_t i = 0; i < cache.size(); ++i) {
        const auto k = rope_apply(cache.entry(i).key, positions[i], rope_base);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += q[j] * k[j];
        scores[i] = dot * scale;
    }
    softmax_inplace(scores);

    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < cache.size(); ++i) {
        const auto& v = cache.entry(i).value;
        for (std::size_t j = 0; j < d; ++j) out[j] += scores[i] * v[j];
    }
    return out;
}

KvCacheSet::KvCacheSet(std::size_t n_layers, std::size_t n_heads, std::size_t d_head,
                       CachePolicy policy)
    : n_layers_(n_layers), n_heads_(n_heads) {
    if (n_layers == 0 || n_heads == 0) throw std::invalid_argument("empty cache set");
    caches_.reserve(n_layers * n_heads);
    for (std::size_t i = 0; i < n_layers * n_heads; ++i) caches_.emplace_back(policy, d_head);
}

KvCacheSet::KvCacheSet(std::vector<KvCache> caches, std::size_t n_layers, std::size_t n_heads)
    : n_layers_(n_layers), n_heads_(n_heads), caches_(std::move(caches)) {
    if (caches_.size() != n_layers * n_heads || caches_.empty()) {
        throw std::invalid_argument("cache count does not match layer/head grid");
    }
    for (const auto& c : caches_) {
        if (!(c.policy() == caches_.front().policy())) {
            throw std::invalid_argument("cache policies differ across layers");
        }
    }
}

KvCache& KvCacheSet::at(std::size_t layer, std::size_t head) {
    return caches_[layer * n_heads_ + head];
}

const KvCache& KvCacheSet::at(std::size_t layer, std::size_t head) const {
    return caches_[layer * n_heads_ + head];
}

} // namespace sinklab

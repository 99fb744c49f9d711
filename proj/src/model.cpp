#include "sinklab/model.hpp"

#include "sinklab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace sinklab {

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1 ||
        train_context_len < 1) {
        throw std::invalid_argument("model config fields must all be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("d_model must be divisible by n_heads");
    }
    if (d_head() % 2 != 0) {
        throw std::invalid_argument("d_head must be even for rotary positions");
    }
}

std::size_t ModelConfig::param_count() const {
    std::size_t per_layer = 2ull * d_model + 4ull * d_model * d_model + 2ull * d_model * d_ff;
    return static_cast<std::size_t>(vocab_size) * d_model + n_layers * per_layer + d_model +
           static_cast<std::size_t>(vocab_size) * d_model;
}

static LayerWeights make_layer(const ModelConfig& c) {
    LayerWeights l;
    l.attn_gain = Tensor({c.d_model});
    l.wq = Tensor({c.d_model, c.d_model});
    l.wk = Tensor({c.d_model, c.d_model});
    l.wv = Tensor({c.d_model, c.d_model});
    l.wo = Tensor({c.d_model, c.d_model});
    l.mlp_gain = Tensor({c.d_model});
    l.w1 = Tensor({c.d_ff, c.d_model});
    l.w2 = Tensor({c.d_model, c.d_ff});
    return l;
}

TinyLmModel TinyLmModel::zeros(const ModelConfig& config) {
    config.validate();
    TinyLmModel m;
    m.config = config;
    m.embedding = Tensor({config.vocab_size, config.d_model});
    for (std::uint32_t i = 0; i < config.n_layers; ++i) m.layers.push_back(make_layer(config));
    m.final_gain = Tensor({config.d_model});
    m.output_proj = Tensor({config.vocab_size, config.d_model});
    return m;
}

TinyLmModel TinyLmModel::random_init(const ModelConfig& config, std::uint64_t seed) {
    TinyLmModel m = zeros(config);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Tensor& t, double std_dev) {
        std::normal_distribution<double> dist(0.0, std_dev);
        for (auto& v : t.data()) v = dist(rng);
    };
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(config.d_model));
    fill(m.embedding, 0.05);
    for (auto& l : m.layers) {
        for (auto& v : l.attn_gain.data()) v = 1.0;
        fill(l.wq, proj_std);
        fill(l.wk, proj_std);
        fill(l.wv, proj_std);
        fill(l.wo, proj_std);
        for (auto& v : l.mlp_gain.data()) v = 1.0;
        fill(l.w1, proj_std);
        fill(l.w2, 1.0 / std::sqrt(static_cast<double>(config.d_ff)));
    }
    for (auto& v : m.final_gain.data()) v = 1.0;
    fill(m.output_proj, proj_std);
    return m;
}

std::vector<Tensor*> TinyLmModel::param_views() {
    std::vector<Tensor*> v;
    v.push_back(&embedding);
    for (auto& l : layers) {
        v.push_back(&l.attn_gain);
        v.push_back(&l.wq);
        v.push_back(&l.wk);
        v.push_back(&l.wv);
        v.push_back(&l.wo);
        v.push_back(&l.mlp_gain);
        v.push_back(&l.w1);
        v.push_back(&l.w2);
    }
    v.push_back(&final_gain);
    v.push_back(&output_proj);
    return v;
}

std::vector<const Tensor*> TinyLmModel::param_views() const {
    auto mut = const_cast<TinyLmModel*>(this)->param_views();
    return {mut.begin(), mut.end()};
}

// Model file: "TLM1" magic, six u32 little-endian config fields, then all
// parameter tensors as contiguous little-endian f64 in param_views order.
static constexpr char kMagic[4] = {'T', 'L', 'M', '1'};

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("model file truncated while reading header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void TinyLmModel::save(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(kMagic, 4);
        put_u32(os, config.n_layers);
        put_u32(os, config.n_heads);
        put_u32(os, config.d_model);
        put_u32(os, config.d_ff);
        put_u32(os, config.vocab_size);
        put_u32(os, config.train_context_len);
        for (const Tensor* t : param_views()) {
            static_assert(sizeof(double) == 8);
            os.write(reinterpret_cast<const char*>(t->data().data()),
                     static_cast<std::streamsize>(t->size() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TinyLmModel TinyLmModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("bad magic in model file " + path.string());
    }
    ModelConfig c;
    c.n_layers = get_u32(is);
    c.n_heads = get_u32(is);
    c.d_model = get_u32(is);
    c.d_ff = get_u32(is);
    c.vocab_size = get_u32(is);
    c.train_context_len = get_u32(is);
    c.validate();
    TinyLmModel m = zeros(c);
    for (Tensor* t : m.param_views()) {
        is.read(reinterpret_cast<char*>(t->data().data()),
                static_cast<std::streamsize>(t->size() * sizeof(double)));
        if (!is) throw std::runtime_error("model file truncated while reading weights");
    }
    char extra;
    if (is.read(&extra, 1)) throw std::runtime_error("trailing bytes in model file");
    return m;
}

namespace {

// y = W x for W [out, in]
std::vector<double> project(const Tensor& w, const std::vector<double>& x) {
    std::vector<double> y(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w.at(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

} // namespace

std::vector<double> forward_step(const TinyLmModel& model, std::uint32_t token_id,
                                 KvCacheSet& caches, std::int64_t step_index) {
    const ModelConfig& c = model.config;
    if (token_id >= c.vocab_size) throw std::invalid_argument("token id out of vocab range");
    if (caches.n_layers() != c.n_layers || caches.n_heads() != c.n_heads) {
        throw std::invalid_argument("cache set does not match model dimensions");
    }
    const std::size_t dh = c.d_head();

    std::vector<double> x(model.embedding.data().begin() + token_id * c.d_model,
                          model.embedding.data().begin() + (token_id + 1) * c.d_model);

    for (std::uint32_t layer = 0; layer < c.n_layers; ++layer) {
        const LayerWeights& lw = model.layers[layer];
        auto h = rmsnorm(x, lw.attn_gain.data());
        auto q = project(lw.wq, h);
        auto k = project(lw.wk, h);
        auto v = project(lw.wv, h);

        std::vector<double> attn(c.d_model, 0.0);
        for (std::uint32_t head = 0; head < c.n_heads; ++head) {
            KvCache& cache = caches.at(layer, head);
            const std::size_t off = head * dh;
            cache.append({k.begin() + off, k.begin() + off + dh},
                         {v.begin() + off, v.begin() + off + dh}, step_index);
            const std::int64_t qpos = cache.cache_positions().back();
            std::vector<double> qh(q.begin() + off, q.begin() + off + dh);
            auto ctx = attend(qh, qpos, cache);
            std::copy(ctx.begin(), ctx.end(), attn.begin() + off);
        }
        auto o = project(lw.wo, attn);
        for (std::size_t i = 0; i < c.d_model; ++i) x[i] += o[i];

        auto h2 = rmsnorm(x, lw.mlp_gain.data());
        auto f1 = project(lw.w1, h2);
        for (auto& val : f1) val = gelu(val);
        auto f2 = project(lw.w2, f1);
        for (std::size_t i = 0; i < c.d_model; ++i) x[i] += f2[i];
    }

    auto hf = rmsnorm(x, model.final_gain.data());
    return project(model.output_proj, hf);
}

std::vector<std::vector<double>> full_forward_logits(const TinyLmModel& model,
                                                     const std::vector<std::uint32_t>& tokens) {
    const ModelConfig& c = model.config;
    const std::size_t n = tokens.size();
    const std::size_t dh = c.d_head();
    if (n == 0) throw std::invalid_argument("full forward needs at least one token");

    std::vector<std::vector<double>> x(n);
    for (std::size_t t = 0; t < n; ++t) {
        if (tokens[t] >= c.vocab_size) throw std::invalid_argument("token id out of vocab range");
        x[t].assign(model.embedding.data().begin() + tokens[t] * c.d_model,
                    model.embedding.data().begin() + (tokens[t] + 1) * c.d_model);
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::uint32_t layer = 0; layer < c.n_layers; ++layer) {
        const LayerWeights& lw = model.layers[layer];
        std::vector<std::vector<double>> q(n), k(n), v(n);
        for (std::size_t t = 0; t < n; ++t) {
            auto h = rmsnorm(x[t], lw.attn_gain.data());
            q[t] = project(lw.wq, h);
            k[t] = project(lw.wk, h);
            v[t] = project(lw.wv, h);
        }
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<double> attn(c.d_model, 0.0);
            for (std::uint32_t head = 0; head < c.n_heads; ++head) {
                const std::size_t off = head * dh;
                auto qh = rope_apply(std::span<const double>(q[t]).subspan(off, dh),
                                     static_cast<std::int64_t>(t));
                std::vector<double> scores(t + 1);
                for (std::size_t u = 0; u <= t; ++u) {
                    auto kh = rope_apply(std::span<const double>(k[u]).subspan(off, dh),
                                         static_cast<std::int64_t>(u));
                    double dot = 0.0;
                    for (std::size_t j = 0; j < dh; ++j) dot += qh[j] * kh[j];
                    scores[u] = dot * scale;
                }
                softmax_inplace(scores);
                for (std::size_t u = 0; u <= t; ++u)
                    for (std::size_t j = 0; j < dh; ++j)
                        attn[off + j] += scores[u] * v[u][off + j];
            }
            auto o = project(lw.wo, attn);
            for (std::size_t i = 0; i < c.d_model; ++i) x[t][i] += o[i];
        }
        for (std::size_t t = 0; t < n; ++t) {
            auto h2 = rmsnorm(x[t], lw.mlp_gain.data());
            auto f1 = project(lw.w1, h2);
            for (auto& val : f1) val = gelu(val);
            auto f2 = project(lw.w2, f1);
            for (std::size_t i = 0; i < c.d_model; ++i) x[t][i] += f2[i];
        }
    }

    std::vector<std::vector<double>> logits(n);
    for (std::size_t t = 0; t < n; ++t) {
        auto hf = rmsnorm(x[t], model.final_gain.data());
        logits[t] = project(model.output_proj, hf);
    }
    return logits;
}

CachePolicy sink_policy_for_prompt(std::size_t prompt_len, std::size_t recent_len) {
    return CachePolicy::sink(prompt_len, recent_len);
}

static std::uint32_t argmax_lowest(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<std::uint32_t>(best);
}

std::vector<std::uint32_t> generate(const TinyLmModel& model,
                                    const std::vector<std::uint32_t>& prompt_tokens,
                                    const CachePolicy& policy, const GenerateOptions& opts) {
    const ModelConfig& c = model.config;
    if (prompt_tokens.empty()) throw std::invalid_argument("prompt must be nonempty");
    if (policy.kind() == PolicyKind::Sink && prompt_tokens.size() > policy.capacity()) {
        throw std::invalid_argument(
            "prompt of " + std::to_string(prompt_tokens.size()) + " tokens exceeds sink cache " +
            policy.describe() + " (capacity " + std::to_string(policy.capacity()) +
            "); the whole prompt must fit in the cache so its tokens can be pinned as "
            "attention sinks alongside the most recent generations");
    }

    KvCacheSet caches(c.n_layers, c.n_heads, c.d_head(), policy);
    std::vector<double> logits;
    std::int64_t pos = 0;
    for (std::uint32_t tok : prompt_tokens) logits = forward_step(model, tok, caches, pos++);

    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < opts.max_new; ++i) {
        std::uint32_t next = argmax_lowest(logits);
        out.push_back(next);
        if (opts.end_token && next == *opts.end_token) break;
        if (i + 1 < opts.max_new) logits = forward_step(model, next, caches, pos++);
    }
    return out;
}

double streaming_perplexity(const TinyLmModel& model, const std::vector<std::uint32_t>& tokens,
                            const CachePolicy& policy) {
    const ModelConfig& c = model.config;
    if (tokens.size() < 2) throw std::invalid_argument("perplexity needs a stream of >= 2 tokens");
    KvCacheSet caches(c.n_layers, c.n_heads, c.d_head(), policy);
    double bits_total = 0.0;
    for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
        auto logits = forward_step(model, tokens[t], caches, static_cast<std::int64_t>(t));
        bits_total += cross_entropy_bits(logits, tokens[t + 1]);
    }
    return std::exp2(bits_total / static_cast<double>(tokens.size() - 1));
}

} // namespace sinklab

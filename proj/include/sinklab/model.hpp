#pragma once

#include "sinklab/kvcache.hpp"
#include "sinklab/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sinklab {

struct ModelConfig {
    std::uint32_t n_layers = 2;
    std::uint32_t n_heads = 2;
    std::uint32_t d_model = 64;
    std::uint32_t d_ff = 128;
    std::uint32_t vocab_size = 256;
    std::uint32_t train_context_len = 64;

    std::uint32_t d_head() const { return d_model / n_heads; }
    void validate() const;
    std::size_t param_count() const;
};

struct LayerWeights {
    Tensor attn_gain; // [d_model]
    Tensor wq, wk, wv, wo; // [d_model, d_model]
    Tensor mlp_gain; // [d_model]
    Tensor w1; // [d_ff, d_model]
    Tensor w2; // [d_model, d_ff]
};

// Decoder-only byte-level LM, pre-norm RMS with rotary positions. Weights
// are plain doubles; a model is immutable once trained and can be shared
// read-only across threads.
struct TinyLmModel {
    ModelConfig config;
    Tensor embedding; // [vocab, d_model]
    std::vector<LayerWeights> layers;
    Tensor final_gain; // [d_model]
    Tensor output_proj; // [vocab, d_model]

    static TinyLmModel zeros(const ModelConfig& config);
    static TinyLmModel random_init(const ModelConfig& config, std::uint64_t seed);

    /// Parameter tensors in serialization order: embedding, then per layer
    /// (attn_gain, wq, wk, wv, wo, mlp_gain, w1, w2), final_gain, output_proj.
    std::vector<Tensor*> param_views();
    std::vector<const Tensor*> param_views() const;

    void save(const std::filesystem::path& path) const;
    static TinyLmModel load(const std::filesystem::path& path);
};

/// Appends this step's K/V to every layer's cache and returns next-token
/// logits. step_index is the token's original position.
std::vector<double> forward_step(const TinyLmModel& model, std::uint32_t token_id,
                                 KvCacheSet& caches, std::int64_t step_index);

/// Full non-cached forward over a token sequence (dense causal attention,
/// positions 0..n-1). Returns logits for every position. This is the
/// training-path forward and doubles as the recompute baseline.
std::vector<std::vector<double>> full_forward_logits(const TinyLmModel& model,
                                                     const std::vector<std::uint32_t>& tokens);

struct GenerateOptions {
    std::size_t max_new = 64;
    std::optional<std::uint32_t> end_token; // stop when emitted
};

/// Greedy decoding; ties break toward the lowest token id. Under a Sink
/// policy the prompt must fit in S+R so its tokens can be pinned in the
/// cache as attention sinks.
std::vector<std::uint32_t> generate(const TinyLmModel& model,
                                    const std::vector<std::uint32_t>& prompt_tokens,
                                    const CachePolicy& policy, const GenerateOptions& opts = {});

/// Sink policy sized for a prompt: every prompt token is a sink and
/// recent_len slots hold fresh generations.
CachePolicy sink_policy_for_prompt(std::size_t prompt_len, std::size_t recent_len);

/// exp(mean next-token cross-entropy), teacher-forced, cache evolving under
/// the policy. Accumulated in log2 so a uniform model scores exactly V.
double streaming_perplexity(const TinyLmModel& model, const std::vector<std::uint32_t>& tokens,
                            const CachePolicy& policy);

} // namespace sinklab

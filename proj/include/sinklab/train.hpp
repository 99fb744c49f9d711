#pragma once

#include "sinklab/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sinklab {

struct TrainStats {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_trace; // one entry per step
};

/// Byte-level LM training: plain SGD, gradient clipped at global norm 1.0,
/// windows of train_context_len sampled deterministically from the seed.
/// Rejects corpora smaller than 10x the context length.
TinyLmModel train_char_lm(const std::vector<std::uint8_t>& corpus_bytes,
                          const ModelConfig& config, std::size_t steps, std::uint64_t seed,
                          double learning_rate, TrainStats* stats = nullptr);

/// Mean next-token cross-entropy of a teacher-forced window (forward only).
double training_loss(const TinyLmModel& model, std::span<const std::uint32_t> inputs,
                     std::span<const std::uint32_t> targets);

/// Analytic gradients of training_loss; returns a same-shaped model holding
/// d(loss)/d(param).
TinyLmModel training_gradients(const TinyLmModel& model, std::span<const std::uint32_t> inputs,
                               std::span<const std::uint32_t> targets,
                               double* loss_out = nullptr);

/// Compares analytic gradients with central finite differences (step h) on
/// a random parameter subset; returns the max relative error. Only valid
/// for small models (<= 10^4 parameters).
double grad_check(const TinyLmModel& model, std::span<const std::uint32_t> inputs,
                  std::span<const std::uint32_t> targets, std::size_t n_samples = 64,
                  double h = 1e-5, std::uint64_t seed = 0);

} // namespace sinklab

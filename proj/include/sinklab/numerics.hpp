#pragma once

#include "sinklab/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sinklab {

// Dense kernels shared by attention, generation and training. Everything is
// 64-bit and deterministic; functions are pure and thread-safe.

/// Standard matrix product; throws std::invalid_argument on shape mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Row-wise softmax with max subtraction. Rejects non-finite input.
Tensor softmax_rows(const Tensor& x);

/// In-place softmax over a contiguous row.
void softmax_inplace(std::span<double> row);

/// y_i = gain_i * x_i / sqrt(mean(x^2) + eps)
std::vector<double> rmsnorm(std::span<const double> x, std::span<const double> gain,
                            double eps = 1e-6);

/// Rotary position encoding: pairwise 2-D rotations with frequencies
/// base^(-2i/d). Requires even dimension; preserves the Euclidean norm.
std::vector<double> rope_apply(std::span<const double> v, std::int64_t position,
                               double base = 10000.0);

/// Inverse rotation, used by backprop (rotations are orthogonal).
std::vector<double> rope_unapply(std::span<const double> v, std::int64_t position,
                                 double base = 10000.0);

/// -log softmax(logits)[target]; target must be in range.
double cross_entropy(std::span<const double> logits, std::size_t target);

/// Same quantity in bits, computed so that uniform logits give exactly
/// log2(V). Streaming perplexity accumulates these and applies exp2, which
/// keeps the zero-weight-model case exact.
double cross_entropy_bits(std::span<const double> logits, std::size_t target);

/// d(cross_entropy)/d(logits) = softmax(logits) - onehot(target).
std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t target);

double log_sum_exp(std::span<const double> v);

} // namespace sinklab

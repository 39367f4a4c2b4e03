#pragma once

#include <random>
#include <vector>

#include "fusereader/tape.hpp"
#include "fusereader/tensor.hpp"

namespace fusereader {

enum class Activation { Tanh, Gelu, Relu };

// Every op is a pure forward computation; when `tape` is non-null and any
// input requires grad, a reverse rule is recorded. Outputs are checked for
// NaN/Inf (finiteness contract).

// Elementwise, same shape.
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);

// y = c * x for a plain constant.
Tensor scale(Tape* tape, const Tensor& x, double c);

// y = s * x where s is a single-element tensor; grads flow into both.
Tensor scalar_mul(Tape* tape, const Tensor& s, const Tensor& x);

// x: [n x d], bias: [d], broadcast over rows.
Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias);

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape* tape, const Tensor& x);
Tensor reshape(Tape* tape, const Tensor& x, Shape shape);

// Row gather (also serves as embedding lookup); grad scatter-adds.
Tensor rows(Tape* tape, const Tensor& x, const std::vector<std::size_t>& indices);
Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts);
Tensor select(Tape* tape, const Tensor& x, std::size_t flat_index);

Tensor sum(Tape* tape, const Tensor& x);
Tensor mean(Tape* tape, const Tensor& x);
// [n x m] -> [m], column means.
Tensor mean_axis0(Tape* tape, const Tensor& x);

// out[k] = sum of x[p] over p in groups[k]; x rank-1.
Tensor gather_sum(Tape* tape, const Tensor& x, const std::vector<std::vector<std::size_t>>& groups);

// Max-subtracted softmax along `axis`; each slice sums to 1.
Tensor softmax(Tape* tape, const Tensor& x, std::size_t axis);

// Softmax restricted to positions where mask == 1; masked entries get
// exactly 0. A slice with no admissible entry is a contract error.
Tensor masked_softmax(Tape* tape, const Tensor& x, const Tensor& mask, std::size_t axis);

Tensor activation(Tape* tape, const Tensor& x, Activation kind);
Tensor tensor_log(Tape* tape, const Tensor& x);

// Per-row layer normalization over the last axis of a [n x d] tensor.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// x: [c_in x L], kernels: [c_out x c_in x k]; cross-correlation,
// L' = floor((L + 2*padding - k) / stride) + 1.
Tensor conv1d(Tape* tape, const Tensor& x, const Tensor& kernels, std::size_t stride,
              std::size_t padding);

// [c x L] -> [c], per-channel mean.
Tensor global_avg_pool(Tape* tape, const Tensor& x);

// Inverted dropout: survivors scaled by 1/(1-p); identity when !training.
Tensor dropout(Tape* tape, const Tensor& x, double p, bool training, std::mt19937_64& rng);

// logits: [batch x K]; mean over batch of -log softmax(logits)[target].
Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& targets);

}  // namespace fusereader

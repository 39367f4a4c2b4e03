#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fusereader/encoder.hpp"

namespace fusereader {

// Conv1d gate over the two encoders' feature sequences: two conv layers
// (kernel 3, d_model -> 128 -> 128 channels, GeLU between), global average
// pool, FC 128 -> 64 with dropout and GeLU, then a 2-logit softmax giving
// the per-model mixing weights.
class CnnWeighter {
 public:
  static constexpr std::size_t kChannels = 128;
  static constexpr std::size_t kHidden = 64;
  static constexpr std::size_t kKernel = 3;

  CnnWeighter(std::size_t d_model, std::uint64_t seed);

  Tensor conv1;  // [128 x d_model x 3]
  Tensor conv2;  // [128 x 128 x 3]
  Tensor fc1_w, fc1_b;
  Tensor fc2_w, fc2_b;
  double dropout_p = 0.1;

  std::size_t d_model() const { return d_model_; }
  ParamMap named_parameters(const std::string& prefix = "");
  void set_requires_grad(bool value);

 private:
  std::size_t d_model_;
};

// (w1, w2) as single-element tensors with w1 + w2 = 1; gradients reach the
// head through both.
std::pair<Tensor, Tensor> cnn_weights(Tape* tape, const Tensor& f1, const Tensor& f2,
                                      const CnnWeighter& head, bool training = false,
                                      std::mt19937_64* rng = nullptr);

// w1*f1 + w2*f2 elementwise; the weights must sum to 1 within 1e-6.
Tensor weighted_combine(Tape* tape, const Tensor& f1, const Tensor& f2, const Tensor& w1,
                        const Tensor& w2);

// MLP candidate scorer: each branch projected to 40 dims, concatenated to 80,
// Tanh hidden of 64, linear out to the 20 candidate slots.
class MlpFuser {
 public:
  static constexpr std::size_t kBranchDim = 40;
  static constexpr std::size_t kHidden = 64;
  static constexpr std::size_t kCandidates = 20;

  MlpFuser(std::size_t d_model, std::uint64_t seed);

  Tensor proj1, proj2;  // [d_model x 40]
  Tensor hidden_w, hidden_b;
  Tensor out_w, out_b;

  std::size_t d_model() const { return d_model_; }
  ParamMap named_parameters(const std::string& prefix = "");
  void set_requires_grad(bool value);

 private:
  std::size_t d_model_;
};

// f1, f2: pooled per-input vectors [d_model]; returns 20 raw scores.
Tensor mlp_scores(Tape* tape, const Tensor& f1, const Tensor& f2, const MlpFuser& head);

// Argmax over valid slots, invalid treated as -inf, ties to the lowest index.
std::size_t select_candidate(std::span<const double> scores, const std::vector<bool>& valid);

}  // namespace fusereader

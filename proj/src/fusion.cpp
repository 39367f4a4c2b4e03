#include "fusereader/fusion.hpp"

#include <cmath>

namespace fusereader {

CnnWeighter::CnnWeighter(std::size_t d_model, std::uint64_t seed) : d_model_(d_model) {
  if (d_model == 0) throw ConfigError("CnnWeighter: d_model must be positive");
  std::mt19937_64 rng(seed);
  const double init_std = 0.05;
  conv1 = Tensor::randn({kChannels, d_model, kKernel}, rng, init_std, true);
  conv2 = Tensor::randn({kChannels, kChannels, kKernel}, rng, init_std, true);
  fc1_w = Tensor::randn({kChannels, kHidden}, rng, init_std, true);
  fc1_b = Tensor::zeros({kHidden}, true);
  fc2_w = Tensor::randn({kHidden, 2}, rng, init_std, true);
  fc2_b = Tensor::zeros({2}, true);
}

ParamMap CnnWeighter::named_parameters(const std::string& prefix) {
  return {{prefix + "conv1", conv1},   {prefix + "conv2", conv2}, {prefix + "fc1_w", fc1_w},
          {prefix + "fc1_b", fc1_b},   {prefix + "fc2_w", fc2_w}, {prefix + "fc2_b", fc2_b}};
}

void CnnWeighter::set_requires_grad(bool value) {
  for (auto& [name, t] : named_parameters()) t.set_requires_grad(value);
}

std::pair<Tensor, Tensor> cnn_weights(Tape* tape, const Tensor& f1, const Tensor& f2,
                                      const CnnWeighter& head, bool training,
                                      std::mt19937_64* rng) {
  if (f1.shape() != f2.shape()) {
    throw DimensionError("cnn_weights: branch shapes differ: " + shape_str(f1.shape()) + " vs " +
                         shape_str(f2.shape()));
  }
  if (f1.rank() != 2 || f1.dim(1) != head.d_model()) {
    throw DimensionError("cnn_weights: expected [len x d_model] branch features");
  }
  if (training && head.dropout_p > 0.0 && rng == nullptr) {
    throw ContractError("cnn_weights: training with dropout requires an rng");
  }

  // Concatenate along the sequence axis, then treat d_model as channels.
  Tensor stacked = transpose(tape, concat_rows(tape, {f1, f2}));  // [d x 2len]
  Tensor h = activation(tape, conv1d(tape, stacked, head.conv1, 1, 1), Activation::Gelu);
  h = conv1d(tape, h, head.conv2, 1, 1);
  Tensor pooled = reshape(tape, global_avg_pool(tape, h), {1, CnnWeighter::kChannels});

  Tensor fc = matmul(tape, pooled, head.fc1_w);
  fc = add_bias(tape, fc, head.fc1_b);
  if (training && head.dropout_p > 0.0) fc = dropout(tape, fc, head.dropout_p, true, *rng);
  fc = activation(tape, fc, Activation::Gelu);
  Tensor logits = add_bias(tape, matmul(tape, fc, head.fc2_w), head.fc2_b);
  Tensor weights = softmax(tape, logits, 1);
  return {select(tape, weights, 0), select(tape, weights, 1)};
}

Tensor weighted_combine(Tape* tape, const Tensor& f1, const Tensor& f2, const Tensor& w1,
                        const Tensor& w2) {
  if (f1.shape() != f2.shape()) {
    throw DimensionError("weighted_combine: shapes differ: " + shape_str(f1.shape()) + " vs " +
                         shape_str(f2.shape()));
  }
  if (!w1.is_scalar() || !w2.is_scalar()) {
    throw DimensionError("weighted_combine: weights must be single-element tensors");
  }
  if (std::abs(w1.data()[0] + w2.data()[0] - 1.0) > 1e-6) {
    throw ContractError("weighted_combine: weights must sum to 1");
  }
  return add(tape, scalar_mul(tape, w1, f1), scalar_mul(tape, w2, f2));
}

MlpFuser::MlpFuser(std::size_t d_model, std::uint64_t seed) : d_model_(d_model) {
  if (d_model == 0) throw ConfigError("MlpFuser: d_model must be positive");
  std::mt19937_64 rng(seed);
  const double init_std = 0.05;
  proj1 = Tensor::randn({d_model, kBranchDim}, rng, init_std, true);
  proj2 = Tensor::randn({d_model, kBranchDim}, rng, init_std, true);
  hidden_w = Tensor::randn({2 * kBranchDim, kHidden}, rng, init_std, true);
  hidden_b = Tensor::zeros({kHidden}, true);
  out_w = Tensor::randn({kHidden, kCandidates}, rng, init_std, true);
  out_b = Tensor::zeros({kCandidates}, true);
}

ParamMap MlpFuser::named_parameters(const std::string& prefix) {
  return {{prefix + "proj1", proj1},       {prefix + "proj2", proj2},
          {prefix + "hidden_w", hidden_w}, {prefix + "hidden_b", hidden_b},
          {prefix + "out_w", out_w},       {prefix + "out_b", out_b}};
}

void MlpFuser::set_requires_grad(bool value) {
  for (auto& [name, t] : named_parameters()) t.set_requires_grad(value);
}

Tensor mlp_scores(Tape* tape, const Tensor& f1, const Tensor& f2, const MlpFuser& head) {
  if (f1.rank() != 1 || f2.rank() != 1 || f1.dim(0) != head.d_model() ||
      f2.dim(0) != head.d_model()) {
    throw DimensionError("mlp_scores: branch features must be pooled [d_model] vectors");
  }
  Tensor b1 = matmul(tape, reshape(tape, f1, {1, head.d_model()}), head.proj1);
  Tensor b2 = matmul(tape, reshape(tape, f2, {1, head.d_model()}), head.proj2);
  Tensor joined = concat_rows(tape, {reshape(tape, b1, {MlpFuser::kBranchDim}),
                                     reshape(tape, b2, {MlpFuser::kBranchDim})});
  Tensor hidden = activation(
      tape,
      add_bias(tape, matmul(tape, reshape(tape, joined, {1, 2 * MlpFuser::kBranchDim}), head.hidden_w),
               head.hidden_b),
      Activation::Tanh);
  Tensor out = add_bias(tape, matmul(tape, hidden, head.out_w), head.out_b);
  return reshape(tape, out, {MlpFuser::kCandidates});
}

std::size_t select_candidate(std::span<const double> scores, const std::vector<bool>& valid) {
  if (scores.empty() || scores.size() > MlpFuser::kCandidates) {
    throw DimensionError("select_candidate: need 1..20 scores");
  }
  if (valid.size() < scores.size()) {
    throw DimensionError("select_candidate: validity mask shorter than scores");
  }
  bool found = false;
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!valid[i]) continue;
    if (!found || scores[i] > scores[best]) {
      best = i;
      found = true;
    }
  }
  if (!found) throw ContractError("select_candidate: no valid candidates");
  return best;
}

}  // namespace fusereader

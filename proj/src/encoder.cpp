#include "fusereader/encoder.hpp"

#include <cmath>

namespace fusereader {

void EncoderConfig::validate() const {
  if (num_heads == 0 || d_model == 0 || d_ff == 0 || max_len == 0 || vocab_size == 0) {
    throw ConfigError("encoder config: all dimensions must be positive");
  }
  if (d_model % num_heads != 0) {
    throw ConfigError("encoder config: d_model " + std::to_string(d_model) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ConfigError("encoder config: dropout_p must be in [0, 1)");
  }
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model) {
  std::vector<double> data(max_len * d_model);
  for (std::size_t t = 0; t < max_len; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      data[t * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({max_len, d_model}, std::move(data));
}

EncoderModel::EncoderModel(EncoderConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const double init_std = 0.02;
  std::size_t d = config_.d_model;
  std::size_t dh = config_.head_dim();

  word_embedding = Tensor::randn({config_.vocab_size, d}, rng, init_std, true);
  segment_embedding = Tensor::randn({2, d}, rng, init_std, true);
  position_table = sinusoidal_positions(config_.max_len, d);

  layers.resize(config_.num_layers);
  for (auto& layer : layers) {
    layer.heads.resize(config_.num_heads);
    for (auto& head : layer.heads) {
      head.wq = Tensor::randn({d, dh}, rng, init_std, true);
      head.bq = Tensor::zeros({dh}, true);
      head.wk = Tensor::randn({d, dh}, rng, init_std, true);
      head.bk = Tensor::zeros({dh}, true);
      head.wv = Tensor::randn({d, dh}, rng, init_std, true);
      head.bv = Tensor::zeros({dh}, true);
      head.wo = Tensor::randn({dh, d}, rng, init_std, true);
    }
    layer.bo = Tensor::zeros({d}, true);
    layer.ln1_gamma = Tensor::full({d}, 1.0, true);
    layer.ln1_beta = Tensor::zeros({d}, true);
    layer.ln2_gamma = Tensor::full({d}, 1.0, true);
    layer.ln2_beta = Tensor::zeros({d}, true);
    layer.ff_w1 = Tensor::randn({d, config_.d_ff}, rng, init_std, true);
    layer.ff_b1 = Tensor::zeros({config_.d_ff}, true);
    layer.ff_w2 = Tensor::randn({config_.d_ff, d}, rng, init_std, true);
    layer.ff_b2 = Tensor::zeros({d}, true);
  }
  final_gamma = Tensor::full({d}, 1.0, true);
  final_beta = Tensor::zeros({d}, true);
}

ParamMap EncoderModel::named_parameters(const std::string& prefix) {
  ParamMap params;
  params.emplace_back(prefix + "word_embedding", word_embedding);
  params.emplace_back(prefix + "segment_embedding", segment_embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string lp = prefix + "layers." + std::to_string(l) + ".";
    EncoderLayer& layer = layers[l];
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      std::string hp = lp + "heads." + std::to_string(h) + ".";
      AttentionHead& head = layer.heads[h];
      params.emplace_back(hp + "wq", head.wq);
      params.emplace_back(hp + "bq", head.bq);
      params.emplace_back(hp + "wk", head.wk);
      params.emplace_back(hp + "bk", head.bk);
      params.emplace_back(hp + "wv", head.wv);
      params.emplace_back(hp + "bv", head.bv);
      params.emplace_back(hp + "wo", head.wo);
    }
    params.emplace_back(lp + "bo", layer.bo);
    params.emplace_back(lp + "ln1_gamma", layer.ln1_gamma);
    params.emplace_back(lp + "ln1_beta", layer.ln1_beta);
    params.emplace_back(lp + "ln2_gamma", layer.ln2_gamma);
    params.emplace_back(lp + "ln2_beta", layer.ln2_beta);
    params.emplace_back(lp + "ff_w1", layer.ff_w1);
    params.emplace_back(lp + "ff_b1", layer.ff_b1);
    params.emplace_back(lp + "ff_w2", layer.ff_w2);
    params.emplace_back(lp + "ff_b2", layer.ff_b2);
  }
  params.emplace_back(prefix + "final_gamma", final_gamma);
  params.emplace_back(prefix + "final_beta", final_beta);
  return params;
}

void EncoderModel::set_requires_grad(bool value) {
  for (auto& [name, tensor] : named_parameters()) tensor.set_requires_grad(value);
}

Tensor embed(Tape* tape, const TokenSequence& seq, const EncoderModel& model) {
  seq.validate();
  std::size_t len = seq.length();
  if (len > model.config().max_len) {
    throw DimensionError("embed: sequence length " + std::to_string(len) + " exceeds max_len " +
                         std::to_string(model.config().max_len));
  }
  for (std::size_t id : seq.ids) {
    if (id >= model.config().vocab_size) {
      throw IndexError("embed: token id " + std::to_string(id) + " outside vocab");
    }
  }
  std::vector<std::size_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = i;

  Tensor words = rows(tape, model.word_embedding, seq.ids);
  Tensor segs = rows(tape, model.segment_embedding, seq.segments);
  Tensor pos = rows(tape, model.position_table, positions);
  return add(tape, add(tape, words, segs), pos);
}

Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: incompatible operand shapes");
  }
  if (mask.rank() != 2 || mask.dim(0) != q.dim(0) || mask.dim(1) != k.dim(0)) {
    throw DimensionError("attention: mask must be [n x m]");
  }
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt_d);
  Tensor weights = masked_softmax(tape, scores, mask, 1);
  return matmul(tape, weights, v);
}

Tensor padding_mask(const TokenSequence& seq) {
  std::size_t len = seq.length();
  std::vector<double> data(len * len);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < len; ++j) {
      data[i * len + j] = static_cast<double>(seq.mask[j]);
    }
  }
  return Tensor::from({len, len}, std::move(data));
}

Tensor encode(Tape* tape, const TokenSequence& seq, const EncoderModel& model,
              const Tensor* attn_mask, bool training, std::mt19937_64* rng) {
  const EncoderConfig& cfg = model.config();
  bool use_dropout = training && cfg.dropout_p > 0.0;
  if (use_dropout && rng == nullptr) {
    throw ContractError("encode: training with dropout requires an rng");
  }
  Tensor mask = attn_mask ? *attn_mask : padding_mask(seq);

  Tensor x = embed(tape, seq, model);
  for (const EncoderLayer& layer : model.layers) {
    Tensor normed = layer_norm(tape, x, layer.ln1_gamma, layer.ln1_beta);

    Tensor attn_sum;
    for (const AttentionHead& head : layer.heads) {
      Tensor q = add_bias(tape, matmul(tape, normed, head.wq), head.bq);
      Tensor k = add_bias(tape, matmul(tape, normed, head.wk), head.bk);
      Tensor v = add_bias(tape, matmul(tape, normed, head.wv), head.bv);
      Tensor head_out = matmul(tape, attention(tape, q, k, v, mask), head.wo);
      attn_sum = attn_sum.defined() ? add(tape, attn_sum, head_out) : head_out;
    }
    Tensor attn_out = add_bias(tape, attn_sum, layer.bo);
    if (use_dropout) attn_out = dropout(tape, attn_out, cfg.dropout_p, true, *rng);
    x = add(tape, x, attn_out);

    Tensor normed2 = layer_norm(tape, x, layer.ln2_gamma, layer.ln2_beta);
    Tensor hidden = activation(tape, add_bias(tape, matmul(tape, normed2, layer.ff_w1), layer.ff_b1),
                               Activation::Gelu);
    Tensor ffn_out = add_bias(tape, matmul(tape, hidden, layer.ff_w2), layer.ff_b2);
    if (use_dropout) ffn_out = dropout(tape, ffn_out, cfg.dropout_p, true, *rng);
    x = add(tape, x, ffn_out);
  }
  return layer_norm(tape, x, model.final_gamma, model.final_beta);
}

Tensor pooled_feature(Tape* tape, const Tensor& features) {
  if (features.rank() != 2) {
    throw DimensionError("pooled_feature: expected [len x d], got " + shape_str(features.shape()));
  }
  return reshape(tape, rows(tape, features, {0}), {features.dim(1)});
}

}  // namespace fusereader

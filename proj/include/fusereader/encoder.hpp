#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fusereader/ops.hpp"
#include "fusereader/tape.hpp"
#include "fusereader/tensor.hpp"
#include "fusereader/tokenizer.hpp"

namespace fusereader {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t max_len = 128;
  std::size_t vocab_size = 8192;
  double dropout_p = 0.1;

  void validate() const;
  std::size_t head_dim() const { return d_model / num_heads; }
};

// Ordered (name, tensor) pairs; iteration order is the registry order used
// by optimizers and checkpoints.
using ParamMap = std::vector<std::pair<std::string, Tensor>>;

struct AttentionHead {
  Tensor wq, bq, wk, bk, wv, bv;  // [d x d_h], [d_h]
  Tensor wo;                      // [d_h x d]
};

struct EncoderLayer {
  std::vector<AttentionHead> heads;
  Tensor bo;                       // [d]
  Tensor ln1_gamma, ln1_beta;      // pre-attention norm
  Tensor ln2_gamma, ln2_beta;      // pre-ffn norm
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
};

// Transformer encoder with learned word/segment embeddings and a frozen
// sinusoidal position table. Two instances with distinct seeds play the two
// ensemble roles.
class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  Tensor word_embedding;     // [vocab x d]
  Tensor segment_embedding;  // [2 x d]
  Tensor position_table;     // [max_len x d], not learned
  std::vector<EncoderLayer> layers;
  Tensor final_gamma, final_beta;

  // Learned parameters only, in a fixed registry order.
  ParamMap named_parameters(const std::string& prefix = "");
  void set_requires_grad(bool value);

 private:
  EncoderConfig config_;
  std::uint64_t seed_;
};

// Standard sin/cos interleave, row per position.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t d_model);

// Word + segment + position embeddings summed per position.
Tensor embed(Tape* tape, const TokenSequence& seq, const EncoderModel& model);

// Scaled dot-product attention with a {0,1} admissibility mask [n x m];
// masked entries get zero weight, an all-masked row is a contract error.
Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& mask);

// Bidirectional mask derived from padding: every position may attend to all
// real (non-pad) positions.
Tensor padding_mask(const TokenSequence& seq);

// Pre-norm transformer stack over the full sequence; `attn_mask` defaults to
// the padding-derived bidirectional mask.
Tensor encode(Tape* tape, const TokenSequence& seq, const EncoderModel& model,
              const Tensor* attn_mask = nullptr, bool training = false,
              std::mt19937_64* rng = nullptr);

// The [CLS]-position feature vector, shape [d_model].
Tensor pooled_feature(Tape* tape, const Tensor& features);

}  // namespace fusereader

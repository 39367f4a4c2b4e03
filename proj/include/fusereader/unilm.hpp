#pragma once

#include <span>
#include <string>

#include "fusereader/encoder.hpp"
#include "fusereader/tokenizer.hpp"

namespace fusereader {

struct GenerationConfig {
  std::size_t max_answer_len = 16;
  std::size_t stop_id = Vocab::kSep;

  void validate() const;
};

// Seq2seq attention mask over [src + tgt] positions: the source block is
// bidirectional, target rows see the source plus their own causal prefix,
// and source rows never see the target.
Tensor build_seq2seq_mask(std::size_t src_len, std::size_t tgt_len);

// Argmax with ties broken toward the lowest id.
std::size_t argmax_lowest(std::span<const double> values);

// Logits for the next token after `features`' last position, projected
// through the tied word-embedding matrix.
Tensor next_token_logits(Tape* tape, const Tensor& features, const Tensor& word_embedding);

// One greedy step: encode the prefix (src + generated target so far) under
// the seq2seq mask and pick the next id from the last position.
std::size_t decode_step(const EncoderModel& model, const TokenSequence& prefix,
                        std::size_t src_len, const Vocab& vocab);

// Greedy autoregressive answer generation; dropout off, fully deterministic.
std::string generate(const EncoderModel& model, const std::string& question,
                     const std::string& context, const Vocab& vocab,
                     const GenerationConfig& gen);

// Builds the unpadded [CLS] q [SEP] c [SEP] source, reserving room for
// `reserve_tgt` generated tokens within the model's max_len.
TokenSequence build_source(const std::string& question, const std::string& context,
                           const Vocab& vocab, std::size_t max_len, std::size_t reserve_tgt);

// Teacher-forced next-token loss: positions src_len-1 .. end of `features`
// predict `target_ids` (gold answer tokens plus the stop id) against the
// tied embedding projection.
Tensor generation_loss(Tape* tape, const Tensor& features, const Tensor& word_embedding,
                       std::size_t src_len, const std::vector<std::size_t>& target_ids);

}  // namespace fusereader

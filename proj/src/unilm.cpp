#include "fusereader/unilm.hpp"

#include <algorithm>

namespace fusereader {

void GenerationConfig::validate() const {
  if (max_answer_len < 1) throw ParameterError("generation config: max_answer_len must be >= 1");
}

Tensor build_seq2seq_mask(std::size_t src_len, std::size_t tgt_len) {
  if (src_len == 0) throw ParameterError("seq2seq mask: src_len must be positive");
  std::size_t total = src_len + tgt_len;
  std::vector<double> data(total * total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = 0; j < total; ++j) {
      // Source columns are visible to everyone; target columns only to
      // target rows at or after them (source rows never see the target).
      bool allowed = j < src_len || i >= j;
      data[i * total + j] = allowed ? 1.0 : 0.0;
    }
  }
  return Tensor::from({total, total}, std::move(data));
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax over empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Tensor next_token_logits(Tape* tape, const Tensor& features, const Tensor& word_embedding) {
  if (features.rank() != 2) throw DimensionError("next_token_logits: features must be [len x d]");
  Tensor last = rows(tape, features, {features.dim(0) - 1});
  return matmul(tape, last, transpose(tape, word_embedding));
}

std::size_t decode_step(const EncoderModel& model, const TokenSequence& prefix,
                        std::size_t src_len, const Vocab& vocab) {
  if (prefix.length() >= model.config().max_len) {
    throw DimensionError("decode_step: prefix length " + std::to_string(prefix.length()) +
                         " leaves no room under max_len " +
                         std::to_string(model.config().max_len));
  }
  if (src_len == 0 || src_len > prefix.length()) {
    throw ContractError("decode_step: src_len must be within the prefix");
  }
  Tensor mask = build_seq2seq_mask(src_len, prefix.length() - src_len);
  Tensor features = encode(nullptr, prefix, model, &mask);
  Tensor logits = next_token_logits(nullptr, features, model.word_embedding);
  std::size_t limit = std::min(vocab.size(), logits.size());
  return argmax_lowest(logits.data().subspan(0, limit));
}

TokenSequence build_source(const std::string& question, const std::string& context,
                           const Vocab& vocab, std::size_t max_len, std::size_t reserve_tgt) {
  if (max_len <= reserve_tgt + 4) {
    throw ParameterError("build_source: max_len too small for the reserved target span");
  }
  TokenSequence padded = encode_pair(question, context, vocab, max_len - reserve_tgt);
  std::size_t real = padded.real_length();
  TokenSequence src;
  src.ids.assign(padded.ids.begin(), padded.ids.begin() + real);
  src.segments.assign(padded.segments.begin(), padded.segments.begin() + real);
  src.mask.assign(real, 1);
  return src;
}

std::string generate(const EncoderModel& model, const std::string& question,
                     const std::string& context, const Vocab& vocab,
                     const GenerationConfig& gen) {
  gen.validate();
  TokenSequence prefix =
      build_source(question, context, vocab, model.config().max_len, gen.max_answer_len);
  std::size_t src_len = prefix.length();

  std::vector<std::size_t> generated;
  for (std::size_t step = 0; step < gen.max_answer_len; ++step) {
    std::size_t next = decode_step(model, prefix, src_len, vocab);
    if (next == gen.stop_id) break;
    generated.push_back(next);
    prefix.ids.push_back(next);
    prefix.segments.push_back(1);
    prefix.mask.push_back(1);
  }
  return decode(generated, vocab);
}

Tensor generation_loss(Tape* tape, const Tensor& features, const Tensor& word_embedding,
                       std::size_t src_len, const std::vector<std::size_t>& target_ids) {
  if (target_ids.empty()) throw ContractError("generation_loss: no targets");
  if (src_len == 0 || src_len + target_ids.size() - 1 > features.dim(0)) {
    throw DimensionError("generation_loss: features too short for the target span");
  }
  std::vector<std::size_t> positions(target_ids.size());
  for (std::size_t t = 0; t < target_ids.size(); ++t) positions[t] = src_len - 1 + t;
  Tensor picked = rows(tape, features, positions);
  Tensor logits = matmul(tape, picked, transpose(tape, word_embedding));
  return cross_entropy(tape, logits, target_ids);
}

}  // namespace fusereader

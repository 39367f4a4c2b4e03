#include "fusereader/aoa.hpp"

#include "fusereader/unilm.hpp"

namespace fusereader {

Tensor match_matrix(Tape* tape, const Tensor& doc_emb, const Tensor& qry_emb) {
  if (doc_emb.rank() != 2 || qry_emb.rank() != 2 || doc_emb.dim(1) != qry_emb.dim(1)) {
    throw DimensionError("match_matrix: embeddings must share the feature dimension, got " +
                         shape_str(doc_emb.shape()) + " vs " + shape_str(qry_emb.shape()));
  }
  return matmul(tape, doc_emb, transpose(tape, qry_emb));
}

AoAState aoa_scores(Tape* tape, const Tensor& matching) {
  if (matching.rank() != 2) throw DimensionError("aoa_scores: matching matrix must be [n x m]");
  std::size_t n = matching.dim(0), m = matching.dim(1);

  AoAState state;
  state.matching = matching;
  state.alpha = softmax(tape, matching, 0);
  Tensor beta = softmax(tape, matching, 1);
  state.beta_bar = mean_axis0(tape, beta);
  Tensor s_col = matmul(tape, state.alpha, reshape(tape, state.beta_bar, {m, 1}));
  state.scores = reshape(tape, s_col, {n});
  return state;
}

Tensor candidate_scores(Tape* tape, const Tensor& scores,
                        const std::vector<std::vector<std::size_t>>& occurrences) {
  if (occurrences.empty()) throw ContractError("candidate_scores: no candidates");
  return gather_sum(tape, scores, occurrences);
}

std::size_t predict_candidate(const Tensor& cand_scores) {
  return argmax_lowest(cand_scores.data());
}

Tensor cloze_nll(Tape* tape, const Tensor& cand_scores, std::size_t gold_index) {
  if (gold_index >= cand_scores.size()) {
    throw IndexError("cloze_nll: gold index " + std::to_string(gold_index) + " out of range");
  }
  Tensor total = sum(tape, cand_scores);
  Tensor gold = select(tape, cand_scores, gold_index);
  return sub(tape, tensor_log(tape, total), tensor_log(tape, gold));
}

}  // namespace fusereader

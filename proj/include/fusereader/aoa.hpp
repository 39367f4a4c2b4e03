#pragma once

#include <vector>

#include "fusereader/ops.hpp"
#include "fusereader/tape.hpp"

namespace fusereader {

// Attention-over-attention state for one (document, query) pair.
struct AoAState {
  Tensor matching;  // [n x m] dot products
  Tensor alpha;     // [n x m], each column sums to 1 (query-to-document)
  Tensor beta_bar;  // [m], averaged document-to-query attention, sums to 1
  Tensor scores;    // [n], per-document-token answer probability, sums to 1
};

// M[i][j] = dot(doc_i, qry_j).
Tensor match_matrix(Tape* tape, const Tensor& doc_emb, const Tensor& qry_emb);

// Column softmax, row softmax, row-average, and the attention-stacking
// product s = alpha . beta_bar.
AoAState aoa_scores(Tape* tape, const Tensor& matching);

// Pointer-sum aggregation: score(c) = sum of s[p] over the candidate's
// occurrence positions. Returns a rank-1 tensor, one slot per candidate.
Tensor candidate_scores(Tape* tape, const Tensor& scores,
                        const std::vector<std::vector<std::size_t>>& occurrences);

// Argmax prediction over candidate scores, ties to the lowest index.
std::size_t predict_candidate(const Tensor& cand_scores);

// Negative log of the renormalized gold candidate score.
Tensor cloze_nll(Tape* tape, const Tensor& cand_scores, std::size_t gold_index);

}  // namespace fusereader

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fusereader/errors.hpp"

namespace fusereader {

using TokenList = std::vector<std::string>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-example metric values; absent fields were not applicable to the run.
struct MetricRow {
  std::optional<double> rouge1, rouge2, rouge_l, bleu;
  std::optional<double> precision, recall, f1;
  std::optional<double> accuracy;
};

// Corpus aggregation (macro average over examples).
struct MetricReport {
  std::optional<double> rouge1, rouge2, rouge_l, bleu;
  std::optional<double> precision, recall, f1;
  std::optional<double> accuracy;
  std::size_t count = 0;
};

// Clipped n-gram multiset overlap. Empty-side convention throughout: both
// sides without n-grams -> 1.0, exactly one -> 0.0.
Prf rouge_n(const TokenList& candidate, const TokenList& reference, std::size_t n);

// Longest-common-subsequence precision/recall/F.
Prf rouge_l(const TokenList& candidate, const TokenList& reference);

// Sentence BLEU: geometric mean of modified n-gram precisions with add-one
// smoothing on zero counts, orders capped at the candidate length, brevity
// penalty exp(1 - |ref|/|cand|) for short candidates.
double bleu(const TokenList& candidate, const TokenList& reference, std::size_t max_n = 4);

// Multiset token overlap with SQuAD-style empty conventions.
Prf token_prf(const TokenList& candidate, const TokenList& reference);

double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& gold);

MetricReport corpus_report(const std::vector<MetricRow>& rows);

// Canonical column order of the results tables.
extern const char* const kCsvHeader;
std::string csv_row(const std::string& model_label, const MetricReport& report);

}  // namespace fusereader

#include "fusereader/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace fusereader {

namespace {

double harmonic(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::map<std::string, std::size_t> ngram_counts(const TokenList& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      key += tokens[i + j];
      key.push_back('\x1f');
    }
    counts[key] += 1;
  }
  return counts;
}

std::size_t clipped_overlap(const std::map<std::string, std::size_t>& cand,
                            const std::map<std::string, std::size_t>& ref) {
  std::size_t overlap = 0;
  for (const auto& [key, count] : cand) {
    auto it = ref.find(key);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Prf rouge_n(const TokenList& candidate, const TokenList& reference, std::size_t n) {
  if (n < 1) throw ParameterError("rouge_n: n must be >= 1");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  if (cand_total == 0 && ref_total == 0) return {1.0, 1.0, 1.0};
  if (cand_total == 0 || ref_total == 0) return {0.0, 0.0, 0.0};
  double overlap = static_cast<double>(clipped_overlap(cand, ref));
  double p = overlap / static_cast<double>(cand_total);
  double r = overlap / static_cast<double>(ref_total);
  return {p, r, harmonic(p, r)};
}

Prf rouge_l(const TokenList& candidate, const TokenList& reference) {
  if (candidate.empty() && reference.empty()) return {1.0, 1.0, 1.0};
  if (candidate.empty() || reference.empty()) return {0.0, 0.0, 0.0};
  double l = static_cast<double>(lcs_length(candidate, reference));
  double p = l / static_cast<double>(candidate.size());
  double r = l / static_cast<double>(reference.size());
  return {p, r, harmonic(p, r)};
}

double bleu(const TokenList& candidate, const TokenList& reference, std::size_t max_n) {
  if (max_n < 1) throw ParameterError("bleu: max_n must be >= 1");
  if (candidate.empty()) return 0.0;
  std::size_t orders = std::min(max_n, candidate.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    std::size_t total = candidate.size() - n + 1;
    std::size_t matched = clipped_overlap(cand, ref);
    double p = matched > 0
                   ? static_cast<double>(matched) / static_cast<double>(total)
                   : 1.0 / static_cast<double>(total + 1);  // add-one smoothing on zero counts
    log_sum += std::log(p);
  }
  double geo = std::exp(log_sum / static_cast<double>(orders));
  double bp = candidate.size() < reference.size()
                  ? std::exp(1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(candidate.size()))
                  : 1.0;
  return bp * geo;
}

Prf token_prf(const TokenList& candidate, const TokenList& reference) {
  if (candidate.empty() && reference.empty()) return {1.0, 1.0, 1.0};
  if (candidate.empty() || reference.empty()) return {0.0, 0.0, 0.0};
  auto cand = ngram_counts(candidate, 1);
  auto ref = ngram_counts(reference, 1);
  double overlap = static_cast<double>(clipped_overlap(cand, ref));
  double p = overlap / static_cast<double>(candidate.size());
  double r = overlap / static_cast<double>(reference.size());
  return {p, r, harmonic(p, r)};
}

double accuracy(const std::vector<std::size_t>& predictions,
                const std::vector<std::size_t>& gold) {
  if (predictions.size() != gold.size()) {
    throw ContractError("accuracy: prediction/gold length mismatch");
  }
  if (predictions.empty()) throw ContractError("accuracy: empty inputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == gold[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace {

void fold(std::optional<double>& total, std::size_t& n, const std::optional<double>& value) {
  if (!value) return;
  total = total.value_or(0.0) + *value;
  n += 1;
}

std::optional<double> finish(const std::optional<double>& total, std::size_t n) {
  if (!total) return std::nullopt;
  return *total / static_cast<double>(n);
}

}  // namespace

MetricReport corpus_report(const std::vector<MetricRow>& rows) {
  if (rows.empty()) throw ContractError("corpus_report: no rows");
  std::optional<double> r1, r2, rl, bl, p, r, f, a;
  std::size_t n1 = 0, n2 = 0, nl = 0, nb = 0, np = 0, nr = 0, nf = 0, na = 0;
  for (const MetricRow& row : rows) {
    fold(r1, n1, row.rouge1);
    fold(r2, n2, row.rouge2);
    fold(rl, nl, row.rouge_l);
    fold(bl, nb, row.bleu);
    fold(p, np, row.precision);
    fold(r, nr, row.recall);
    fold(f, nf, row.f1);
    fold(a, na, row.accuracy);
  }
  MetricReport report;
  report.rouge1 = finish(r1, n1);
  report.rouge2 = finish(r2, n2);
  report.rouge_l = finish(rl, nl);
  report.bleu = finish(bl, nb);
  report.precision = finish(p, np);
  report.recall = finish(r, nr);
  report.f1 = finish(f, nf);
  report.accuracy = finish(a, na);
  report.count = rows.size();
  return report;
}

const char* const kCsvHeader = "Models,Rouge-1,Rouge-2,Rouge-L,Bleu,Precision,Recall,F1-score";

std::string csv_row(const std::string& model_label, const MetricReport& report) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };
  std::string row = model_label;
  for (const auto& v : {report.rouge1, report.rouge2, report.rouge_l, report.bleu,
                        report.precision, report.recall, report.f1}) {
    row += ",";
    row += cell(v);
  }
  return row;
}

}  // namespace fusereader

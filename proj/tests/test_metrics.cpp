#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "fusereader/metrics.hpp"
#include "fusereader/text.hpp"

using namespace fusereader;

namespace {

// Brute-force oracles, written against different data structures than the
// library (sorted vectors / recursion instead of hash-count maps).

std::vector<TokenList> grams(const TokenList& t, std::size_t n) {
  std::vector<TokenList> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t overlap_oracle(const TokenList& c, const TokenList& r, std::size_t n) {
  auto cg = grams(c, n), rg = grams(r, n);
  std::vector<TokenList> common;
  std::set_intersection(cg.begin(), cg.end(), rg.begin(), rg.end(), std::back_inserter(common));
  return common.size();
}

Prf rouge_n_oracle(const TokenList& c, const TokenList& r, std::size_t n) {
  std::size_t ct = c.size() >= n ? c.size() - n + 1 : 0;
  std::size_t rt = r.size() >= n ? r.size() - n + 1 : 0;
  if (ct == 0 && rt == 0) return {1, 1, 1};
  if (ct == 0 || rt == 0) return {0, 0, 0};
  double ov = static_cast<double>(overlap_oracle(c, r, n));
  double p = ov / ct, rr = ov / rt;
  double f = (p + rr == 0) ? 0.0 : 2 * p * rr / (p + rr);
  return {p, rr, f};
}

std::size_t lcs_oracle_rec(const TokenList& a, const TokenList& b, std::size_t i, std::size_t j,
                           std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
  if (i == a.size() || j == b.size()) return 0;
  auto key = std::make_pair(i, j);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  std::size_t v = a[i] == b[j]
                      ? 1 + lcs_oracle_rec(a, b, i + 1, j + 1, memo)
                      : std::max(lcs_oracle_rec(a, b, i + 1, j, memo), lcs_oracle_rec(a, b, i, j + 1, memo));
  memo[key] = v;
  return v;
}

std::size_t lcs_oracle(const TokenList& a, const TokenList& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  return lcs_oracle_rec(a, b, 0, 0, memo);
}

double bleu_oracle(const TokenList& c, const TokenList& r, std::size_t max_n) {
  if (c.empty()) return 0.0;
  std::size_t orders = std::min(max_n, c.size());
  double product = 1.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    double total = static_cast<double>(c.size() - n + 1);
    double matched = static_cast<double>(overlap_oracle(c, r, n));
    double p = matched > 0 ? matched / total : 1.0 / (total + 1.0);
    product *= p;
  }
  double geo = std::pow(product, 1.0 / static_cast<double>(orders));
  double bp = c.size() < r.size()
                  ? std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size()))
                  : 1.0;
  return bp * geo;
}

TokenList random_tokens(std::mt19937_64& rng, std::size_t max_len) {
  static const char* alphabet[8] = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, 7);
  TokenList out;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) out.push_back(alphabet[pick(rng)]);
  return out;
}

}  // namespace

TEST_CASE("rouge_n hand cases") {
  TokenList same = {"x", "y"};
  Prf id1 = rouge_n(same, same, 1);
  CHECK(id1.precision == 1.0);
  CHECK(id1.recall == 1.0);
  CHECK(id1.f1 == 1.0);

  Prf disjoint = rouge_n({"a"}, {"b"}, 1);
  CHECK(disjoint.f1 == 0.0);

  Prf partial = rouge_n(normalize_tokens("the cat"), normalize_tokens("the cat sat"), 1);
  CHECK(partial.precision == doctest::Approx(1.0));
  CHECK(partial.recall == doctest::Approx(2.0 / 3.0));
  CHECK(partial.f1 == doctest::Approx(0.8));
}

TEST_CASE("rouge_l hand cases") {
  Prf id = rouge_l({"a", "b"}, {"a", "b"});
  CHECK(id.f1 == 1.0);

  Prf sub = rouge_l(normalize_tokens("a c"), normalize_tokens("a b c"));
  CHECK(sub.precision == doctest::Approx(1.0));
  CHECK(sub.recall == doctest::Approx(2.0 / 3.0));
  CHECK(sub.f1 == doctest::Approx(0.8));
  CHECK(lcs_oracle(normalize_tokens("a c"), normalize_tokens("a b c")) == 2);

  TokenList fwd = {"a", "b", "c"}, rev = {"c", "b", "a"};
  CHECK(lcs_oracle(rev, fwd) == 1);
  CHECK(rouge_l(rev, fwd).precision == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bleu hand cases") {
  TokenList same = {"q", "w", "e"};
  CHECK(bleu(same, same) == doctest::Approx(1.0));
  CHECK(bleu({}, same) == 0.0);

  TokenList cand = normalize_tokens("the the the");
  TokenList ref = normalize_tokens("the cat");
  // orders 1..3: p1 = 1/3 (clipped), p2 = 1/3 (smoothed), p3 = 1/2 (smoothed);
  // candidate is longer, so no brevity penalty.
  double expect = std::pow(1.0 / 18.0, 1.0 / 3.0);
  CHECK(bleu(cand, ref) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(bleu(cand, ref) - bleu_oracle(cand, ref, 4)) < 1e-9);
}

TEST_CASE("bleu brevity penalty") {
  TokenList cand = {"a"};
  TokenList ref = {"a", "b", "c"};
  // p1 = 1, orders capped at 1, bp = exp(1 - 3)
  CHECK(bleu(cand, ref) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("token_prf hand cases") {
  Prf id = token_prf({"z"}, {"z"});
  CHECK(id.f1 == 1.0);

  Prf half = token_prf(normalize_tokens("a b"), normalize_tokens("b c"));
  CHECK(half.precision == doctest::Approx(0.5));
  CHECK(half.recall == doctest::Approx(0.5));
  CHECK(half.f1 == doctest::Approx(0.5));

  Prf empty_cand = token_prf({}, {"x"});
  CHECK(empty_cand.precision == 0.0);
  CHECK(empty_cand.f1 == 0.0);
  Prf both_empty = token_prf({}, {});
  CHECK(both_empty.f1 == 1.0);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
  CHECK(accuracy({1, 2, 3, 4}, {1, 2, 3, 9}) == 0.75);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), ContractError);
  CHECK_THROWS_AS(accuracy({}, {}), ContractError);
}

TEST_CASE("corpus_report averages per metric") {
  MetricRow a, b;
  a.f1 = 0.4;
  b.f1 = 0.6;
  a.accuracy = 1.0;
  b.accuracy = 0.0;
  MetricReport rep = corpus_report({a, b});
  CHECK(rep.f1 == doctest::Approx(0.5));
  CHECK(rep.accuracy == doctest::Approx(0.5));
  CHECK(rep.count == 2);
  CHECK_FALSE(rep.bleu.has_value());

  MetricReport single = corpus_report({a});
  CHECK(single.f1 == doctest::Approx(0.4));

  CHECK_THROWS_AS(corpus_report({}), ContractError);
}

TEST_CASE("corpus_report matches summation oracle on random rows") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<MetricRow> rows(100);
  double total = 0.0;
  for (auto& row : rows) {
    row.rouge1 = dist(rng);
    total += *row.rouge1;
  }
  MetricReport rep = corpus_report(rows);
  CHECK(std::abs(*rep.rouge1 - total / 100.0) < 1e-12);
}

TEST_CASE("metrics match brute-force oracles on 1000 random pairs") {
  std::mt19937_64 rng(123);
  for (int rep = 0; rep < 1000; ++rep) {
    TokenList c = random_tokens(rng, 12);
    TokenList r = random_tokens(rng, 12);

    for (std::size_t n : {std::size_t{1}, std::size_t{2}}) {
      Prf got = rouge_n(c, r, n);
      Prf want = rouge_n_oracle(c, r, n);
      CHECK(got.precision == want.precision);
      CHECK(got.recall == want.recall);
      CHECK(got.f1 == want.f1);
      CHECK(got.precision >= 0.0);
      CHECK(got.precision <= 1.0);
      CHECK(got.recall >= 0.0);
      CHECK(got.recall <= 1.0);
    }

    Prf l = rouge_l(c, r);
    if (!c.empty() && !r.empty()) {
      std::size_t lcs = lcs_oracle(c, r);
      CHECK(lcs <= std::min(c.size(), r.size()));
      CHECK(l.precision == static_cast<double>(lcs) / c.size());
      CHECK(l.recall == static_cast<double>(lcs) / r.size());
    }

    CHECK(std::abs(bleu(c, r) - bleu_oracle(c, r, 4)) < 1e-9);

    Prf tp = token_prf(c, r);
    if (!c.empty() && !r.empty()) {
      double ov = static_cast<double>(overlap_oracle(c, r, 1));
      CHECK(tp.precision == ov / c.size());
      CHECK(tp.recall == ov / r.size());
    }
  }
}

TEST_CASE("csv header matches the results-table columns") {
  CHECK(std::string(kCsvHeader) == "Models,Rouge-1,Rouge-2,Rouge-L,Bleu,Precision,Recall,F1-score");
  MetricReport rep;
  rep.rouge1 = 0.5;
  rep.f1 = 0.25;
  CHECK(csv_row("demo", rep) == "demo,0.500000,,,,,,0.250000");
}

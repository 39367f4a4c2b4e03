#include <doctest.h>

#include <cmath>
#include <random>

#include "fusereader/text.hpp"
#include "fusereader/unilm.hpp"

using namespace fusereader;

namespace {

EncoderConfig toy_config() {
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.max_len = 24;
  cfg.vocab_size = 32;
  cfg.dropout_p = 0.0;
  return cfg;
}

TokenSequence raw_seq(std::vector<std::size_t> ids, std::size_t first_sep) {
  TokenSequence seq;
  seq.ids = std::move(ids);
  seq.segments.resize(seq.ids.size());
  for (std::size_t i = 0; i < seq.ids.size(); ++i) seq.segments[i] = i > first_sep ? 1 : 0;
  seq.mask.assign(seq.ids.size(), 1);
  return seq;
}

}  // namespace

TEST_CASE("seq2seq mask shapes forced by the invariants") {
  Tensor pure_src = build_seq2seq_mask(2, 0);
  REQUIRE(pure_src.shape() == Shape{2, 2});
  for (double v : pure_src.data()) CHECK(v == 1.0);

  Tensor m = build_seq2seq_mask(1, 2);
  REQUIRE(m.shape() == Shape{3, 3});
  CHECK(m.data()[0] == 1.0);
  CHECK(m.data()[1] == 0.0);
  CHECK(m.data()[2] == 0.0);
  CHECK(m.data()[3] == 1.0);
  CHECK(m.data()[4] == 1.0);
  CHECK(m.data()[5] == 0.0);
  CHECK(m.data()[6] == 1.0);
  CHECK(m.data()[7] == 1.0);
  CHECK(m.data()[8] == 1.0);

  CHECK_THROWS_AS(build_seq2seq_mask(0, 3), ParameterError);
}

TEST_CASE("seq2seq mask invariants hold for random sizes") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> src_d(1, 8), tgt_d(0, 8);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t s = src_d(rng), t = tgt_d(rng);
    Tensor m = build_seq2seq_mask(s, t);
    std::size_t total = s + t;
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < total; ++j) {
        double v = m(i, j);
        if (i < s && j < s) CHECK(v == 1.0);          // bidirectional source
        if (i < s && j >= s) CHECK(v == 0.0);         // source never sees target
        if (i >= s && j < s) CHECK(v == 1.0);         // target sees all source
        if (i >= s && j >= s) CHECK(v == (i >= j ? 1.0 : 0.0));  // causal target
      }
    }
  }
}

TEST_CASE("argmax contract and tie rule") {
  std::vector<double> rigged(32, -1.0);
  rigged[17] = 3.5;
  CHECK(argmax_lowest(rigged) == 17);

  std::vector<double> tie(12, 0.0);
  tie[4] = 7.0;
  tie[9] = 7.0;
  CHECK(argmax_lowest(tie) == 4);

  CHECK_THROWS_AS(argmax_lowest(std::span<const double>()), ContractError);
}

TEST_CASE("decode_step follows a rigged embedding projection") {
  EncoderModel model(toy_config(), 7);
  TokenSequence prefix = raw_seq({Vocab::kCls, 6, Vocab::kSep, 9, Vocab::kSep}, 2);

  Tensor mask = build_seq2seq_mask(prefix.length(), 0);
  Tensor features = encode(nullptr, prefix, model, &mask);
  std::size_t last = prefix.length() - 1;
  // Point embedding row 17 along the last feature vector and zero the rest:
  // its logit is then strictly positive while all others are exactly 0.
  auto emb = model.word_embedding.mutable_data();
  std::fill(emb.begin(), emb.end(), 0.0);
  for (std::size_t j = 0; j < 8; ++j) emb[17 * 8 + j] = features(last, j);

  Vocab vocab = build_vocab({"a b c d e f g h i j"}, 64);
  CHECK(decode_step(model, prefix, prefix.length(), vocab) == 17);
}

TEST_CASE("decode_step rejects an overflowing prefix") {
  EncoderModel model(toy_config(), 7);
  std::vector<std::size_t> ids(24, 5);
  ids[0] = Vocab::kCls;
  ids[2] = Vocab::kSep;
  TokenSequence prefix = raw_seq(std::move(ids), 2);
  Vocab vocab = build_vocab({"a b"}, 16);
  CHECK_THROWS_AS(decode_step(model, prefix, 4, vocab), DimensionError);
}

TEST_CASE("masked encode with tgt_len=0 equals the bidirectional encode bitwise") {
  EncoderModel model(toy_config(), 13);
  TokenSequence seq = raw_seq({Vocab::kCls, 4, 11, Vocab::kSep, 8, Vocab::kSep}, 3);
  Tensor plain = encode(nullptr, seq, model);
  Tensor mask = build_seq2seq_mask(seq.length(), 0);
  Tensor masked = encode(nullptr, seq, model, &mask);
  REQUIRE(plain.size() == masked.size());
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(plain.data()[i] == masked.data()[i]);
}

TEST_CASE("future target tokens cannot change earlier logits") {
  EncoderModel model(toy_config(), 21);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> id_d(5, 30);

  for (int rep = 0; rep < 25; ++rep) {
    std::size_t src_len = 3 + rep % 4;
    std::size_t tgt_len = 2 + rep % 3;
    std::vector<std::size_t> ids;
    ids.push_back(Vocab::kCls);
    for (std::size_t i = 1; i < src_len - 1; ++i) ids.push_back(id_d(rng));
    ids.push_back(Vocab::kSep);
    for (std::size_t i = 0; i < tgt_len; ++i) ids.push_back(id_d(rng));
    TokenSequence seq = raw_seq(ids, src_len - 1);

    Tensor mask = build_seq2seq_mask(src_len, tgt_len);
    Tensor base = encode(nullptr, seq, model, &mask);

    // perturb the final target token; logits at all earlier positions must
    // be untouched
    TokenSequence perturbed = seq;
    std::size_t t = seq.length() - 1;
    perturbed.ids[t] = 5 + (perturbed.ids[t] + 7) % 26;
    Tensor out = encode(nullptr, perturbed, model, &mask);
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(base(s, j) - out(s, j)) < 1e-9);
      }
    }
  }
}

TEST_CASE("generate terminates, respects the budget, and is deterministic") {
  EncoderModel model(toy_config(), 31);
  Vocab vocab = build_vocab({"what is the cap of x y z answer token"}, 64);
  GenerationConfig gen;
  gen.max_answer_len = 5;

  std::string a = generate(model, "what is x", "x is answer token y z", vocab, gen);
  std::string b = generate(model, "what is x", "x is answer token y z", vocab, gen);
  CHECK(a == b);
  CHECK(normalize_tokens(a).size() <= 5);

  GenerationConfig bad;
  bad.max_answer_len = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("generation_loss aligns predictions with gold tokens") {
  EncoderModel model(toy_config(), 37);
  TokenSequence seq = raw_seq({Vocab::kCls, 6, Vocab::kSep, 10, 12, Vocab::kSep}, 2);
  // src = [CLS] 6 [SEP] (len 3), targets = 10, 12, then stop
  Tensor mask = build_seq2seq_mask(3, 3);
  Tape tape;
  Tensor features = encode(&tape, seq, model, &mask);
  Tensor loss = generation_loss(&tape, features, model.word_embedding, 3,
                                {10, 12, Vocab::kSep});
  CHECK(loss.is_scalar());
  CHECK(loss.item() > 0.0);
  tape.backward(loss);
  CHECK(model.word_embedding.has_grad());

  CHECK_THROWS_AS(generation_loss(nullptr, features, model.word_embedding, 3,
                                  {10, 12, Vocab::kSep, 5, 5, 5}),
                  DimensionError);
}

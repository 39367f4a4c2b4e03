#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "common/grad_check.hpp"
#include "fusereader/checkpoint.hpp"
#include "fusereader/encoder.hpp"

using namespace fusereader;

namespace {

EncoderConfig toy_config(std::size_t layers = 1) {
  EncoderConfig cfg;
  cfg.num_layers = layers;
  cfg.num_heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.max_len = 16;
  cfg.vocab_size = 24;
  cfg.dropout_p = 0.0;
  return cfg;
}

TokenSequence make_seq(std::vector<std::size_t> ids, std::size_t sep_at) {
  TokenSequence seq;
  seq.ids = std::move(ids);
  seq.segments.resize(seq.ids.size());
  seq.mask.assign(seq.ids.size(), 1);
  for (std::size_t i = 0; i < seq.ids.size(); ++i) seq.segments[i] = i > sep_at ? 1 : 0;
  return seq;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig bad = toy_config();
  bad.d_model = 10;  // not divisible by 2 heads? 10 % 2 == 0, use heads=3
  bad.num_heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sinusoidal table is the standard interleave") {
  Tensor pos = sinusoidal_positions(4, 6);
  CHECK(pos(0, 0) == 0.0);
  CHECK(pos(0, 1) == 1.0);
  CHECK(pos(2, 0) == doctest::Approx(std::sin(2.0)));
  CHECK(pos(2, 1) == doctest::Approx(std::cos(2.0)));
  double angle = 3.0 / std::pow(10000.0, 2.0 / 6.0);
  CHECK(pos(3, 2) == doctest::Approx(std::sin(angle)));
  CHECK(pos(3, 3) == doctest::Approx(std::cos(angle)));
}

TEST_CASE("embed decomposes into word + segment + position") {
  EncoderModel model(toy_config(), 3);
  TokenSequence seq = make_seq({Vocab::kCls, 7, Vocab::kSep, 9, Vocab::kSep}, 2);

  SUBCASE("zero embeddings leave only positions") {
    std::fill(model.word_embedding.mutable_data().begin(), model.word_embedding.mutable_data().end(), 0.0);
    std::fill(model.segment_embedding.mutable_data().begin(), model.segment_embedding.mutable_data().end(), 0.0);
    Tensor out = embed(nullptr, seq, model);
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t j = 0; j < 8; ++j) {
        CHECK(out(t, j) == doctest::Approx(model.position_table(t, j)).epsilon(1e-12));
      }
    }
  }

  SUBCASE("same id at two positions differs by position rows only") {
    TokenSequence twin = make_seq({Vocab::kCls, Vocab::kCls, Vocab::kSep}, 2);
    Tensor out = embed(nullptr, twin, model);
    for (std::size_t j = 0; j < 8; ++j) {
      double delta = out(0, j) - out(1, j);
      double pos_delta = model.position_table(0, j) - model.position_table(1, j);
      CHECK(delta == doctest::Approx(pos_delta).epsilon(1e-12));
    }
  }

  SUBCASE("matches three-table sum oracle") {
    Tensor out = embed(nullptr, seq, model);
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t j = 0; j < 8; ++j) {
        double expect = model.word_embedding(seq.ids[t], j) +
                        model.segment_embedding(seq.segments[t], j) + model.position_table(t, j);
        CHECK(std::abs(out(t, j) - expect) < 1e-12);
      }
    }
  }

  SUBCASE("rejects overlong sequences and bad ids") {
    TokenSequence longseq = make_seq(std::vector<std::size_t>(17, Vocab::kSep), 0);
    longseq.ids[0] = Vocab::kCls;
    CHECK_THROWS_AS(embed(nullptr, longseq, model), DimensionError);
    TokenSequence bad = make_seq({Vocab::kCls, 99, Vocab::kSep}, 2);
    CHECK_THROWS_AS(embed(nullptr, bad, model), IndexError);
  }
}

TEST_CASE("attention degenerate and oracle cases") {
  SUBCASE("single key returns v") {
    Tensor q = Tensor::from({1, 3}, {0.3, -1.0, 2.0});
    Tensor k = Tensor::from({1, 3}, {1.0, 1.0, 1.0});
    Tensor v = Tensor::from({1, 2}, {5.0, -7.0});
    Tensor out = attention(nullptr, q, k, v, Tensor::full({1, 1}, 1.0));
    CHECK(out(0, 0) == doctest::Approx(5.0));
    CHECK(out(0, 1) == doctest::Approx(-7.0));
  }

  SUBCASE("identical keys average permitted values") {
    Tensor q = Tensor::from({1, 2}, {0.4, 0.6});
    Tensor k = Tensor::from({3, 2}, {1, 2, 1, 2, 1, 2});
    Tensor v = Tensor::from({3, 1}, {3.0, 6.0, 9.0});
    Tensor all = attention(nullptr, q, k, v, Tensor::full({1, 3}, 1.0));
    CHECK(all(0, 0) == doctest::Approx(6.0));
    Tensor some = attention(nullptr, q, k, v, Tensor::from({1, 3}, {1, 0, 1}));
    CHECK(some(0, 0) == doctest::Approx(6.0));
  }

  SUBCASE("matches direct softmax-matmul oracle") {
    std::mt19937_64 rng(5);
    Tensor q = Tensor::randn({3, 4}, rng);
    Tensor k = Tensor::randn({3, 4}, rng);
    Tensor v = Tensor::randn({3, 4}, rng);
    Tensor mask = Tensor::full({3, 3}, 1.0);
    Tensor out = attention(nullptr, q, k, v, mask);
    for (std::size_t i = 0; i < 3; ++i) {
      double w[3], mx = -1e30;
      for (std::size_t j = 0; j < 3; ++j) {
        w[j] = 0.0;
        for (std::size_t c = 0; c < 4; ++c) w[j] += q(i, c) * k(j, c);
        w[j] /= 2.0;  // sqrt(d)=2
        mx = std::max(mx, w[j]);
      }
      double total = 0.0;
      for (double& x : w) {
        x = std::exp(x - mx);
        total += x;
      }
      for (double& x : w) x /= total;
      for (std::size_t c = 0; c < 4; ++c) {
        double expect = 0.0;
        for (std::size_t j = 0; j < 3; ++j) expect += w[j] * v(j, c);
        CHECK(std::abs(out(i, c) - expect) < 1e-10);
      }
    }
  }

  SUBCASE("all-masked row is a contract error") {
    Tensor q = Tensor::from({1, 2}, {1.0, 1.0});
    Tensor k = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor v = Tensor::from({2, 1}, {1.0, 2.0});
    CHECK_THROWS_AS(attention(nullptr, q, k, v, Tensor::zeros({1, 2})), ContractError);
  }
}

TEST_CASE("attention weights: masked entries below 1e-9, rows sum to 1") {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor scores = Tensor::randn({4, 6}, rng, 3.0);
    std::vector<double> mdata(24, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      mdata[i * 6 + (i % 6)] = 1.0;  // ensure one admissible per row
      for (std::size_t j = 0; j < 6; ++j) {
        if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.5) mdata[i * 6 + j] = 1.0;
      }
    }
    Tensor mask = Tensor::from({4, 6}, mdata);
    Tensor w = masked_softmax(nullptr, scores, mask, 1);
    for (std::size_t i = 0; i < 4; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        total += w(i, j);
        if (mask(i, j) == 0.0) CHECK(w(i, j) < 1e-9);
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("encode with zero layers is layer-norm of embeddings") {
  EncoderModel model(toy_config(0), 11);
  TokenSequence seq = make_seq({Vocab::kCls, 5, Vocab::kSep}, 2);
  Tensor out = encode(nullptr, seq, model);
  Tensor expect = layer_norm(nullptr, embed(nullptr, seq, model), model.final_gamma, model.final_beta);
  REQUIRE(out.shape() == expect.shape());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == expect.data()[i]);
}

TEST_CASE("padded positions are isolated") {
  EncoderModel model(toy_config(2), 13);
  TokenSequence seq;
  seq.ids = {Vocab::kCls, 6, Vocab::kSep, 8, Vocab::kSep, Vocab::kPad, Vocab::kPad};
  seq.segments = {0, 0, 0, 1, 1, 1, 1};
  seq.mask = {1, 1, 1, 1, 1, 0, 0};
  Tensor base = encode(nullptr, seq, model);

  TokenSequence altered = seq;
  altered.ids[6] = 17;  // different id in a padded slot
  Tensor changed = encode(nullptr, altered, model);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(std::abs(base(t, j) - changed(t, j)) < 1e-9);
    }
  }
}

TEST_CASE("causality under a lower-triangular mask") {
  EncoderModel model(toy_config(2), 17);
  std::size_t len = 6;
  std::vector<double> tri(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j <= i; ++j) tri[i * len + j] = 1.0;
  }
  Tensor mask = Tensor::from({len, len}, tri);

  TokenSequence seq = make_seq({Vocab::kCls, 5, Vocab::kSep, 7, 9, 11}, 2);
  Tensor base = encode(nullptr, seq, model, &mask);

  std::mt19937_64 rng(29);
  for (std::size_t t = 3; t < len; ++t) {
    TokenSequence perturbed = seq;
    perturbed.ids[t] = 4 + (perturbed.ids[t] + 3) % 18;
    Tensor out = encode(nullptr, perturbed, model, &mask);
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(base(s, j) - out(s, j)) < 1e-9);
      }
    }
  }
}

TEST_CASE("distinct seeds give distinct encoders") {
  EncoderModel a(toy_config(1), 1);
  EncoderModel b(toy_config(1), 2);
  TokenSequence seq = make_seq({Vocab::kCls, 5, Vocab::kSep}, 2);
  Tensor ya = encode(nullptr, seq, a);
  Tensor yb = encode(nullptr, seq, b);
  double diff = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) diff += std::abs(ya.data()[i] - yb.data()[i]);
  CHECK(diff > 1e-3);
}

TEST_CASE("pooled_feature is the [CLS] row") {
  std::mt19937_64 rng(31);
  Tensor feats = Tensor::randn({4, 6}, rng);
  Tensor pooled = pooled_feature(nullptr, feats);
  REQUIRE(pooled.shape() == Shape{6});
  for (std::size_t j = 0; j < 6; ++j) CHECK(pooled(j) == feats(0, j));

  Tensor single = pooled_feature(nullptr, rows(nullptr, feats, {2}));
  CHECK(single(0) == feats(2, 0));

  // changing another row leaves the pooled vector unchanged
  feats.mutable_data()[3 * 6 + 2] = 99.0;
  Tensor pooled2 = pooled_feature(nullptr, feats);
  for (std::size_t j = 0; j < 6; ++j) CHECK(pooled2(j) == pooled(j));

  CHECK_THROWS_AS(pooled_feature(nullptr, Tensor::zeros({3})), DimensionError);
}

TEST_CASE("full-stack gradients match finite differences at toy dims") {
  EncoderModel model(toy_config(1), 19);
  TokenSequence seq = make_seq({Vocab::kCls, 7, Vocab::kSep, 12, Vocab::kSep}, 2);
  model.set_requires_grad(false);  // leaves under test get flipped back on

  std::vector<Tensor> leaves = {model.word_embedding,       model.segment_embedding,
                                model.layers[0].heads[0].wq, model.layers[0].heads[1].wv,
                                model.layers[0].ff_w1,       model.layers[0].ln1_gamma,
                                model.final_beta};
  fusereader::testing::check_gradients(leaves, [&](Tape& t) {
    Tensor w = Tensor::full({5, 8}, 0.37);
    return mean(&t, mul(&t, encode(&t, seq, model), w));
  });
}

TEST_CASE("encoder checkpoint round-trips") {
  EncoderModel model(toy_config(2), 23);
  auto dir = std::filesystem::temp_directory_path() / "fr_enc_ckpt";
  std::filesystem::remove_all(dir);

  ParamMap params = model.named_parameters("enc.");
  nlohmann::json extra{{"config", encoder_config_to_json(model.config())}, {"seed", model.seed()}};
  save_checkpoint(dir, params, extra);

  nlohmann::json manifest = load_checkpoint_manifest(dir);
  CHECK(manifest["seed"] == 23);
  EncoderConfig cfg = encoder_config_from_json(manifest["config"]);
  CHECK(cfg.num_layers == 2);

  EncoderModel other(toy_config(2), 99);
  ParamMap other_params = other.named_parameters("enc.");
  std::string before = params_hash(other_params);
  load_checkpoint_into(dir, other_params);
  CHECK(params_hash(other_params) == params_hash(params));
  CHECK(params_hash(other_params) != before);
  std::filesystem::remove_all(dir);
}

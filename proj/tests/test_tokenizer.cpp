#include <doctest.h>

#include <filesystem>
#include <random>

#include "fusereader/text.hpp"
#include "fusereader/tokenizer.hpp"

using namespace fusereader;

namespace {

Vocab tiny_vocab() {
  return build_vocab({"aa aa ab"}, 50);
}

std::string random_word(std::mt19937_64& rng, const std::string& alphabet) {
  std::uniform_int_distribution<std::size_t> len(1, 6);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string w;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) w.push_back(alphabet[pick(rng)]);
  return w;
}

}  // namespace

TEST_CASE("normalizer lowercases and splits punctuation") {
  CHECK(normalize_tokens("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(normalize_text("  A  b\tC ") == "a b c");
  CHECK(normalize_tokens("@entity7 is XXXX.") ==
        std::vector<std::string>{"@entity7", "is", "xxxx", "."});
  CHECK(is_entity_marker("@entity12"));
  CHECK_FALSE(is_entity_marker("@entity"));
  CHECK_FALSE(is_entity_marker("@entityx"));
}

TEST_CASE("build_vocab keeps frequent whole words and the reserved block") {
  Vocab v = tiny_vocab();
  CHECK(v.contains("aa"));
  CHECK(v.contains("ab"));
  const auto& reserved = Vocab::reserved_tokens();
  for (std::size_t i = 0; i < reserved.size(); ++i) CHECK(v.token(i) == reserved[i]);
  // the alphabet fallback is always present
  CHECK(v.contains("a"));
  CHECK(v.contains("##b"));
}

TEST_CASE("build_vocab rejects bad inputs") {
  CHECK_THROWS_AS(build_vocab({}, 50), ParameterError);
  CHECK_THROWS_AS(build_vocab({"   "}, 50), ParameterError);
  // 2 chars -> 4 forced alphabet entries + 5 reserved = 9 minimum
  CHECK_THROWS_AS(build_vocab({"aa ab"}, 8), ParameterError);
  CHECK_NOTHROW(build_vocab({"aa ab"}, 9));
}

TEST_CASE("build_vocab is deterministic and capped") {
  std::vector<std::string> corpus = {"the cat sat on the mat", "the dog sat"};
  Vocab a = build_vocab(corpus, 30);
  Vocab b = build_vocab(corpus, 30);
  CHECK(a.size() == b.size());
  CHECK(a.size() <= 30);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.token(i) == b.token(i));
}

TEST_CASE("encode basics") {
  Vocab v = tiny_vocab();
  CHECK(encode("", v).empty());
  CHECK(encode("aa", v) == std::vector<std::size_t>{*v.lookup("aa")});
  CHECK(encode("aab", v) == std::vector<std::size_t>{*v.lookup("aa"), *v.lookup("##b")});
  // unknown character decays to [UNK]
  CHECK(encode("zzz", v) == std::vector<std::size_t>{Vocab::kUnk});
}

TEST_CASE("encode_pair layout, truncation, and errors") {
  Vocab v = tiny_vocab();
  TokenSequence seq = encode_pair("a", "b", v, 8);
  CHECK(seq.ids == std::vector<std::size_t>{Vocab::kCls, *v.lookup("a"), Vocab::kSep,
                                            *v.lookup("b"), Vocab::kSep, Vocab::kPad, Vocab::kPad,
                                            Vocab::kPad});
  CHECK(seq.mask == std::vector<std::size_t>{1, 1, 1, 1, 1, 0, 0, 0});
  CHECK(seq.segments == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 1, 1});

  TokenSequence cut = encode_pair("a", "b a b a b a b", v, 8);
  CHECK(cut.length() == 8);
  CHECK(cut.ids[7] == Vocab::kSep);
  CHECK(cut.real_length() == 8);

  CHECK_THROWS_AS(encode_pair("a a a a a a", "b", v, 8), ParameterError);
  CHECK_THROWS_AS(encode_pair("a", "b", v, 3), ParameterError);
}

TEST_CASE("decode strips specials and merges pieces") {
  Vocab v = build_vocab({"play playing aa"}, 60);
  CHECK(decode({}, v) == "");
  CHECK(decode({Vocab::kCls, *v.lookup("aa"), Vocab::kSep}, v) == "aa");
  REQUIRE(v.contains("play"));
  REQUIRE(v.contains("##ing"));
  CHECK(decode({*v.lookup("play"), *v.lookup("##ing")}, v) == "playing");
  CHECK_THROWS_AS(decode({v.size()}, v), IndexError);
}

TEST_CASE("encode/decode round-trips over the vocab alphabet") {
  std::mt19937_64 rng(5);
  Vocab v = build_vocab({"abc bcad dcba abcd ab dd ccc"}, 64);
  for (int rep = 0; rep < 200; ++rep) {
    std::string text = random_word(rng, "abcd") + " " + random_word(rng, "abcd");
    auto ids = encode(text, v);
    CHECK(decode(ids, v) == normalize_text(text));
  }
}

TEST_CASE("encode_pair invariants hold for random inputs") {
  std::mt19937_64 rng(6);
  Vocab v = build_vocab({"abc bcad dcba abcd ab dd ccc xy z"}, 64);
  for (int rep = 0; rep < 200; ++rep) {
    std::uniform_int_distribution<std::size_t> nwords(1, 3);
    auto make_text = [&](std::size_t n) {
      std::string t;
      for (std::size_t i = 0; i < n; ++i) t += random_word(rng, "abcdxyz ") + " ";
      return t;
    };
    std::uniform_int_distribution<std::size_t> len_dist(16, 40);
    std::size_t max_len = len_dist(rng);
    TokenSequence seq;
    try {
      seq = encode_pair(make_text(nwords(rng)), make_text(nwords(rng) * 3), v, max_len);
    } catch (const ParameterError&) {
      continue;  // oversized question, rejected by contract
    }
    CHECK(seq.length() == max_len);
    CHECK_NOTHROW(seq.validate());
  }
}

TEST_CASE("vocab files round-trip") {
  Vocab v = tiny_vocab();
  auto path = std::filesystem::temp_directory_path() / "fusereader_vocab_test.txt";
  save_vocab(path, v);
  Vocab back = load_vocab(path);
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.token(i) == v.token(i));
  std::filesystem::remove(path);
}

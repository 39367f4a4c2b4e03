#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusereader/errors.hpp"

namespace fusereader {

// Subword vocabulary: whole words plus "##"-prefixed continuation pieces.
// Ids 0..4 are reserved and identical across every vocab. The single-character
// alphabet of the corpus (both "c" and "##c" forms) is always included so
// encoding stays total over seen characters.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kMask = 4;
  static constexpr std::size_t kNumReserved = 5;

  static const std::vector<std::string>& reserved_tokens();

  std::size_t size() const { return id_to_token_.size(); }
  std::optional<std::size_t> lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return lookup(token).has_value(); }
  const std::string& token(std::size_t id) const;

 private:
  friend Vocab build_vocab(const std::vector<std::string>&, std::size_t);
  friend Vocab load_vocab(const std::filesystem::path&);
  void push(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> segments;  // 0 through the first [SEP], 1 after
  std::vector<std::size_t> mask;      // 1 on the real prefix, 0 on padding

  std::size_t length() const { return ids.size(); }
  std::size_t real_length() const;
  void validate() const;
};

// Most-frequent-first over whole words and suffix pieces, capped at max_size,
// deterministic given corpus order.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size);

// Greedy longest-match-first subword segmentation of the normalized text; a
// word that cannot be decomposed becomes [UNK].
std::vector<std::size_t> encode(const std::string& text, const Vocab& vocab);

// [CLS] q... [SEP] c... [SEP] [PAD]..., exactly max_len long. The context is
// truncated first; a question that alone exceeds the budget is an error.
TokenSequence encode_pair(const std::string& question, const std::string& context,
                          const Vocab& vocab, std::size_t max_len);

// Merges "##" pieces, drops [PAD]/[CLS]/[SEP], joins with single spaces.
std::string decode(const std::vector<std::size_t>& ids, const Vocab& vocab);

// Vocab file: UTF-8, one token per line, line number = id.
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace fusereader

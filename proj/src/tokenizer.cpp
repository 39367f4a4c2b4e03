#include "fusereader/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "fusereader/text.hpp"

namespace fusereader {

const std::vector<std::string>& Vocab::reserved_tokens() {
  static const std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return tokens;
}

std::optional<std::size_t> Vocab::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw IndexError("vocab id " + std::to_string(id) + " out of range (size " +
                     std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[id];
}

void Vocab::push(std::string token) {
  token_to_id_.emplace(token, id_to_token_.size());
  id_to_token_.push_back(std::move(token));
}

std::size_t TokenSequence::real_length() const {
  std::size_t n = 0;
  for (std::size_t m : mask) n += m;
  return n;
}

void TokenSequence::validate() const {
  if (ids.size() != segments.size() || ids.size() != mask.size()) {
    throw ContractError("token sequence arrays must have equal length");
  }
  if (ids.empty() || ids[0] != Vocab::kCls) {
    throw ContractError("token sequence must start with [CLS]");
  }
  if (std::find(ids.begin(), ids.end(), Vocab::kSep) == ids.end()) {
    throw ContractError("token sequence must contain a [SEP]");
  }
  bool seen_pad = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0 && mask[i] != 1) throw ContractError("mask entries must be 0/1");
    if (segments[i] != 0 && segments[i] != 1) throw ContractError("segments must be 0/1");
    if (mask[i] == 0) seen_pad = true;
    if (seen_pad && mask[i] == 1) throw ContractError("mask must be a 1-prefix followed by 0s");
  }
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw ParameterError("build_vocab: empty corpus");

  struct Candidate {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Candidate> stats;
  std::size_t order = 0;
  std::set<char> alphabet;

  auto bump = [&](const std::string& token) {
    auto [it, inserted] = stats.try_emplace(token);
    if (inserted) it->second.first_seen = order++;
    it->second.count += 1;
  };

  bool any_word = false;
  for (const std::string& doc : corpus) {
    for (const std::string& word : normalize_tokens(doc)) {
      any_word = true;
      bump(word);
      for (char c : word) alphabet.insert(c);
      if (is_entity_marker(word)) continue;  // markers stay atomic
      for (std::size_t i = 1; i < word.size(); ++i) {
        bump("##" + word.substr(i));
      }
    }
  }
  if (!any_word) throw ParameterError("build_vocab: corpus contains no tokens");

  std::set<std::string> forced;
  for (char c : alphabet) {
    forced.insert(std::string(1, c));
    forced.insert("##" + std::string(1, c));
  }
  if (max_size < Vocab::kNumReserved + forced.size()) {
    throw ParameterError("build_vocab: max_size " + std::to_string(max_size) +
                         " cannot hold the reserved tokens plus the alphabet (" +
                         std::to_string(Vocab::kNumReserved + forced.size()) + ")");
  }

  std::vector<std::pair<std::string, Candidate>> ranked(stats.begin(), stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });

  Vocab vocab;
  for (const std::string& tok : Vocab::reserved_tokens()) vocab.push(tok);

  std::size_t budget = max_size - Vocab::kNumReserved;
  std::set<std::string> pending = forced;
  for (const auto& [token, cand] : ranked) {
    if (vocab.size() - Vocab::kNumReserved >= budget) break;
    auto it = pending.find(token);
    if (it != pending.end()) {
      pending.erase(it);
      vocab.push(token);
    } else if (budget - (vocab.size() - Vocab::kNumReserved) > pending.size()) {
      vocab.push(token);
    }
  }
  for (const std::string& token : pending) vocab.push(token);
  return vocab;
}

namespace {

std::vector<std::size_t> encode_word(const std::string& word, const Vocab& vocab) {
  std::vector<std::size_t> pieces;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t best_len = 0;
    std::size_t best_id = 0;
    for (std::size_t len = word.size() - pos; len >= 1; --len) {
      std::string piece = word.substr(pos, len);
      if (pos > 0) piece = "##" + piece;
      if (auto id = vocab.lookup(piece)) {
        best_len = len;
        best_id = *id;
        break;
      }
    }
    if (best_len == 0) return {Vocab::kUnk};
    pieces.push_back(best_id);
    pos += best_len;
  }
  return pieces;
}

}  // namespace

std::vector<std::size_t> encode(const std::string& text, const Vocab& vocab) {
  std::vector<std::size_t> ids;
  for (const std::string& word : normalize_tokens(text)) {
    auto pieces = encode_word(word, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

TokenSequence encode_pair(const std::string& question, const std::string& context,
                          const Vocab& vocab, std::size_t max_len) {
  if (max_len < 4) throw ParameterError("encode_pair: max_len must be >= 4");
  std::vector<std::size_t> q_ids = encode(question, vocab);
  if (q_ids.size() > max_len - 3) {
    throw ParameterError("encode_pair: question of " + std::to_string(q_ids.size()) +
                         " tokens exceeds the max_len " + std::to_string(max_len) +
                         " budget; questions are never truncated");
  }
  std::vector<std::size_t> c_ids = encode(context, vocab);
  std::size_t c_budget = max_len - 3 - q_ids.size();
  if (c_ids.size() > c_budget) c_ids.resize(c_budget);

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), q_ids.begin(), q_ids.end());
  seq.ids.push_back(Vocab::kSep);
  std::size_t boundary = seq.ids.size();  // first index of segment 1
  seq.ids.insert(seq.ids.end(), c_ids.begin(), c_ids.end());
  seq.ids.push_back(Vocab::kSep);
  std::size_t real = seq.ids.size();
  seq.ids.resize(max_len, Vocab::kPad);

  seq.segments.resize(max_len);
  seq.mask.resize(max_len);
  for (std::size_t i = 0; i < max_len; ++i) {
    seq.segments[i] = i < boundary ? 0 : 1;
    seq.mask[i] = i < real ? 1 : 0;
  }
  seq.validate();
  return seq;
}

std::string decode(const std::vector<std::size_t>& ids, const Vocab& vocab) {
  std::vector<std::string> words;
  for (std::size_t id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep) continue;
    if (tok.size() > 2 && tok.compare(0, 2, "##") == 0 && !words.empty()) {
      words.back() += tok.substr(2);
    } else if (tok.compare(0, 2, "##") == 0) {
      words.push_back(tok.substr(2));
    } else {
      words.push_back(tok);
    }
  }
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (std::size_t id = 0; id < vocab.size(); ++id) out << vocab.token(id) << "\n";
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (vocab.contains(line)) throw DataError("duplicate vocab token: " + line);
    vocab.push(line);
  }
  const auto& reserved = Vocab::reserved_tokens();
  if (vocab.size() < reserved.size()) throw DataError("vocab file missing reserved tokens");
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (vocab.token(i) != reserved[i]) {
      throw DataError("vocab file must start with the reserved tokens in order");
    }
  }
  return vocab;
}

}  // namespace fusereader

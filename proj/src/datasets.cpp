#include "fusereader/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

#include "fusereader/text.hpp"

namespace fusereader {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in " + path.string() + " at byte " + std::to_string(e.byte) +
                    ": " + e.what());
  }
}

std::string get_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

std::size_t count_token(const std::string& text, const std::string& token) {
  std::size_t n = 0;
  for (const std::string& t : normalize_tokens(text)) {
    if (t == token) ++n;
  }
  return n;
}

}  // namespace

FactoidLoad load_factoid(const std::filesystem::path& path) {
  json doc = parse_file(path);
  if (!doc.is_array()) throw DataError(path.string() + ": factoid file must be a JSON array");
  FactoidLoad out;
  for (const json& record : doc) {
    if (!record.is_object()) throw DataError(path.string() + ": factoid records must be objects");
    FactoidInstance inst;
    inst.id = get_string(record, "id");
    inst.question = get_string(record, "question");
    inst.context = get_string(record, "context");
    inst.answer = get_string(record, "answer");
    if (inst.question.empty() || inst.answer.empty()) {
      out.skipped += 1;
      continue;
    }
    out.instances.push_back(std::move(inst));
  }
  if (out.instances.empty()) throw DataError(path.string() + ": no usable factoid records");
  return out;
}

std::vector<ClozeInstance> load_cloze(const std::filesystem::path& path) {
  json doc = parse_file(path);
  if (!doc.is_array()) throw DataError(path.string() + ": cloze file must be a JSON array");
  std::vector<ClozeInstance> out;
  for (const json& record : doc) {
    if (!record.is_object()) throw DataError(path.string() + ": cloze records must be objects");
    ClozeInstance inst;
    inst.id = get_string(record, "id");
    auto fail = [&](const std::string& why) {
      throw DataError(path.string() + ": record '" + inst.id + "': " + why);
    };
    inst.passage = get_string(record, "passage");
    inst.query = get_string(record, "query");
    if (inst.passage.empty() || inst.query.empty()) fail("missing passage or query");
    auto cands = record.find("candidates");
    if (cands == record.end() || !cands->is_array()) fail("missing candidates array");
    for (const json& c : *cands) {
      if (!c.is_string()) fail("candidates must be strings");
      inst.candidates.push_back(c.get<std::string>());
    }
    if (inst.candidates.empty()) fail("empty candidate list");
    if (inst.candidates.size() > 20) fail("more than 20 candidates");
    auto ans = record.find("answer_index");
    if (ans == record.end() || !ans->is_number_unsigned()) fail("missing answer_index");
    inst.answer_index = ans->get<std::size_t>();
    if (inst.answer_index >= inst.candidates.size()) fail("answer_index out of range");
    if (count_token(inst.query, "xxxx") != 1) fail("query must contain exactly one XXXX placeholder");
    for (const std::string& cand : inst.candidates) {
      if (!is_entity_marker(cand)) fail("candidate '" + cand + "' is not an @entityN marker");
      if (count_token(inst.passage, cand) == 0) fail("candidate '" + cand + "' absent from passage");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void write_factoid(const std::filesystem::path& path, const std::vector<FactoidInstance>& items) {
  json doc = json::array();
  for (const FactoidInstance& inst : items) {
    doc.push_back({{"id", inst.id},
                   {"question", inst.question},
                   {"context", inst.context},
                   {"answer", inst.answer}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
}

void write_cloze(const std::filesystem::path& path, const std::vector<ClozeInstance>& items) {
  json doc = json::array();
  for (const ClozeInstance& inst : items) {
    doc.push_back({{"id", inst.id},
                   {"passage", inst.passage},
                   {"query", inst.query},
                   {"candidates", inst.candidates},
                   {"answer_index", inst.answer_index}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
}

std::string entity_marker(std::size_t k) {
  return "@entity" + std::to_string(k);
}

std::string cloze_cue_word(std::size_t k) {
  return "cue" + std::to_string(k);
}

std::vector<ClozeInstance> synth_cloze(std::size_t n, std::size_t vocab_size,
                                       std::size_t num_entities, double signal,
                                       std::uint64_t seed) {
  if (num_entities < 2) throw ParameterError("synth_cloze: need at least 2 entities");
  if (num_entities > 20) throw ParameterError("synth_cloze: at most 20 candidate entities");
  if (signal < 0.0 || signal > 1.0) throw ParameterError("synth_cloze: signal must be in [0, 1]");
  std::size_t fillers = std::max<std::size_t>(4, vocab_size);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_entity(0, num_entities - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, fillers - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> candidates;
  for (std::size_t k = 0; k < num_entities; ++k) candidates.push_back(entity_marker(k));

  std::vector<ClozeInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ClozeInstance inst;
    inst.id = "synth-cloze-" + std::to_string(i);
    inst.candidates = candidates;
    std::size_t gold = pick_entity(rng);
    bool informative = unit(rng) < signal;
    inst.answer_index = gold;

    std::vector<std::size_t> order(num_entities);
    for (std::size_t k = 0; k < num_entities; ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);

    std::string passage;
    for (std::size_t k : order) {
      std::string lead = informative ? cloze_cue_word(k) : "w" + std::to_string(pick_filler(rng));
      passage += lead + " " + entity_marker(k) + " w" + std::to_string(pick_filler(rng)) + " ";
    }
    passage += ".";
    inst.passage = passage;

    std::size_t query_cue = informative ? gold : pick_entity(rng);
    inst.query = "find XXXX with " + cloze_cue_word(query_cue);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<FactoidInstance> synth_factoid(std::size_t n, std::size_t vocab_size,
                                           std::uint64_t seed, double non_extractable_frac) {
  if (n < 1) throw ParameterError("synth_factoid: n must be >= 1");
  if (non_extractable_frac < 0.0 || non_extractable_frac > 1.0) {
    throw ParameterError("synth_factoid: fraction must be in [0, 1]");
  }
  std::size_t pool = std::max<std::size_t>(4, vocab_size / 4);
  const std::size_t relations = 6;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_pool(0, pool - 1);
  std::uniform_int_distribution<std::size_t> pick_rel(0, relations - 1);

  // Exactly round(frac * n) aliased answers, spread by a seeded shuffle.
  std::size_t aliased = static_cast<std::size_t>(std::llround(non_extractable_frac * static_cast<double>(n)));
  std::vector<bool> alias_mask(n, false);
  std::fill(alias_mask.begin(), alias_mask.begin() + std::min(aliased, n), true);
  std::shuffle(alias_mask.begin(), alias_mask.end(), rng);

  auto subj = [](std::size_t i) { return "item" + std::to_string(i); };
  auto rel = [](std::size_t j) { return "rel" + std::to_string(j); };
  auto mod = [](std::size_t m) { return "mod" + std::to_string(m); };
  auto obj = [](std::size_t k) { return "obj" + std::to_string(k); };

  std::vector<FactoidInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = pick_pool(rng), r = pick_rel(rng);
    std::size_t m = pick_pool(rng), o = pick_pool(rng);

    std::string context = subj(s) + " " + rel(r) + " " + mod(m) + " " + obj(o) + " .";
    for (int d = 0; d < 2; ++d) {
      std::size_t s2 = pick_pool(rng), r2 = pick_rel(rng);
      while (s2 == s && r2 == r) {
        s2 = pick_pool(rng);
        r2 = pick_rel(rng);
      }
      context += " " + subj(s2) + " " + rel(r2) + " " + mod(pick_pool(rng)) + " " +
                 obj(pick_pool(rng)) + " .";
    }

    FactoidInstance inst;
    inst.id = "synth-factoid-" + std::to_string(i);
    inst.question = "what " + rel(r) + " " + subj(s);
    inst.context = context;
    inst.answer = alias_mask[i] ? "am" + std::to_string(m) + " ak" + std::to_string(o)
                                : mod(m) + " " + obj(o);
    out.push_back(std::move(inst));
  }
  return out;
}

bool answer_extractable(const FactoidInstance& instance) {
  auto answer = normalize_tokens(instance.answer);
  auto context = normalize_tokens(instance.context);
  if (answer.empty()) return true;
  if (answer.size() > context.size()) return false;
  for (std::size_t i = 0; i + answer.size() <= context.size(); ++i) {
    if (std::equal(answer.begin(), answer.end(), context.begin() + i)) return true;
  }
  return false;
}

}  // namespace fusereader

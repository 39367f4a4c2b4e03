#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fusereader/errors.hpp"

namespace fusereader {

struct FactoidInstance {
  std::string id;
  std::string question;
  std::string context;
  std::string answer;
};

struct ClozeInstance {
  std::string id;
  std::string passage;  // contains "@entityN" markers
  std::string query;    // contains exactly one "XXXX" placeholder
  std::vector<std::string> candidates;
  std::size_t answer_index = 0;
};

struct FactoidLoad {
  std::vector<FactoidInstance> instances;
  std::size_t skipped = 0;  // records dropped for missing question/answer
};

// Factoid schema: JSON array of {id, question, context, answer}. Records
// missing a question or answer are skipped and counted; an unreadable file or
// zero usable records is an error.
FactoidLoad load_factoid(const std::filesystem::path& path);

// Cloze schema: JSON array of {id, passage, query, candidates, answer_index}.
// Label integrity matters here, so invariant violations fail hard citing the
// record id.
std::vector<ClozeInstance> load_cloze(const std::filesystem::path& path);

void write_factoid(const std::filesystem::path& path, const std::vector<FactoidInstance>& items);
void write_cloze(const std::filesystem::path& path, const std::vector<ClozeInstance>& items);

// Deterministic token naming shared by the generators and their oracles.
std::string entity_marker(std::size_t k);
std::string cloze_cue_word(std::size_t k);

// Cloze generator. With probability `signal` the query names the cue word
// tied to the gold entity and every entity in the passage sits next to its
// own cue; otherwise the instance carries no information about the answer.
// Candidates are all entities in fixed index order.
std::vector<ClozeInstance> synth_cloze(std::size_t n, std::size_t vocab_size,
                                       std::size_t num_entities, double signal,
                                       std::uint64_t seed);

// Factoid generator: template questions over (subject, relation, object)
// facts with two distractor facts per context. A fixed count
// round(non_extractable_frac * n) of answers is replaced by alias tokens that
// never occur in the context.
std::vector<FactoidInstance> synth_factoid(std::size_t n, std::size_t vocab_size,
                                           std::uint64_t seed,
                                           double non_extractable_frac = 0.25);

// True when every normalized answer token appears contiguously in the context.
bool answer_extractable(const FactoidInstance& instance);

}  // namespace fusereader

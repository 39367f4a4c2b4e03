#include "fusereader/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "fusereader/checkpoint.hpp"
#include "fusereader/text.hpp"
#include "fusereader/util.hpp"

namespace fusereader {

namespace {

std::string canonical_key(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // the bioA/bioB spelling is an accepted alias for the bertA/bertB rows
  auto replace_all = [](std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(key, "bioberta", "berta");
  replace_all(key, "biobertb", "bertb");
  replace_all(key, "bioa", "berta");
  replace_all(key, "biob", "bertb");
  return key;
}

struct PresetTableEntry {
  const char* canonical;
  PresetInfo info;
};

std::vector<PresetTableEntry> build_preset_table() {
  auto factoid = [](const char* name, bool a, bool b, bool fa, bool fb, bool gate) {
    PresetTableEntry e;
    e.canonical = name;
    e.info.name = name;
    e.info.method = Method::FactoidGen;
    e.info.factoid = FactoidPreset{a, b, fa, fb, gate};
    return e;
  };
  auto cloze = [](const char* name, ClozeKind kind) {
    PresetTableEntry e;
    e.canonical = name;
    e.info.name = name;
    e.info.method = Method::ClozeAoA;
    e.info.cloze = kind;
    return e;
  };
  return {
      factoid("bertA", true, false, false, false, false),
      factoid("bertB", false, true, false, false, false),
      factoid("bertA+bertB", true, true, false, false, false),
      factoid("bertA(F)+bertB", true, true, true, false, false),
      factoid("bertB(F)+bertA", true, true, false, true, false),
      factoid("bertA+bertB+mlp", true, true, false, false, true),
      factoid("bertA(F)+bertB+mlp", true, true, true, false, true),
      factoid("bertB(F)+bertA+mlp", true, true, false, true, true),
      cloze("encA", ClozeKind::EncA),
      cloze("encB", ClozeKind::EncB),
      cloze("aoa", ClozeKind::Aoa),
      cloze("mlp_fused", ClozeKind::MlpFused),
  };
}

const std::vector<PresetTableEntry>& preset_table() {
  static const std::vector<PresetTableEntry> table = build_preset_table();
  return table;
}

std::vector<std::vector<double>> snapshot_params(const ParamMap& params) {
  std::vector<std::vector<double>> copy;
  copy.reserve(params.size());
  for (const auto& [name, t] : params) copy.emplace_back(t.data().begin(), t.data().end());
  return copy;
}

void restore_params(ParamMap& params, const std::vector<std::vector<double>>& copy) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(copy[i].begin(), copy[i].end(), params[i].second.mutable_data().begin());
  }
}

ParamMap frozen_partition(ParamMap& all, const std::vector<std::string>& groups) {
  ParamMap frozen;
  for (auto& [name, t] : all) {
    for (const std::string& g : groups) {
      if (name == g || (name.size() > g.size() && name.compare(0, g.size(), g) == 0 &&
                        name[g.size()] == '.')) {
        frozen.emplace_back(name, t);
        break;
      }
    }
  }
  return frozen;
}

}  // namespace

const std::vector<std::string>& factoid_preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : preset_table()) {
      if (e.info.method == Method::FactoidGen) out.push_back(e.canonical);
    }
    return out;
  }();
  return names;
}

const std::vector<std::string>& cloze_preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : preset_table()) {
      if (e.info.method == Method::ClozeAoA) out.push_back(e.canonical);
    }
    return out;
  }();
  return names;
}

PresetInfo resolve_preset(const std::string& name) {
  std::string key = canonical_key(name);
  for (const auto& e : preset_table()) {
    if (canonical_key(e.canonical) == key) return e.info;
  }
  std::string known;
  for (const auto& e : preset_table()) {
    if (!known.empty()) known += ", ";
    known += e.canonical;
  }
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

Vocab factoid_vocab(const std::vector<FactoidInstance>& items, std::size_t max_size) {
  std::vector<std::string> corpus;
  corpus.reserve(items.size() * 3);
  for (const auto& inst : items) {
    corpus.push_back(inst.question);
    corpus.push_back(inst.context);
    corpus.push_back(inst.answer);
  }
  return build_vocab(corpus, max_size);
}

Vocab cloze_vocab(const std::vector<ClozeInstance>& items, std::size_t max_size) {
  std::vector<std::string> corpus;
  corpus.reserve(items.size() * 2);
  for (const auto& inst : items) {
    corpus.push_back(inst.passage);
    corpus.push_back(inst.query);
  }
  return build_vocab(corpus, max_size);
}

TokenSequence encode_text(const std::string& text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw ParameterError("encode_text: max_len must be >= 3");
  std::vector<std::size_t> ids = encode(text, vocab);
  if (ids.size() > max_len - 2) ids.resize(max_len - 2);
  TokenSequence seq;
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  seq.ids.push_back(Vocab::kSep);
  seq.segments.assign(seq.ids.size(), 0);
  seq.mask.assign(seq.ids.size(), 1);
  return seq;
}

// ---------------------------------------------------------------------------
// FactoidModel

FactoidModel::FactoidModel(const PresetInfo& preset, EncoderConfig encoder_config, Vocab vocab,
                           GenerationConfig generation, std::uint64_t seed)
    : preset_(preset),
      encoder_config_(encoder_config),
      vocab_(std::move(vocab)),
      generation_(generation) {
  if (preset_.method != Method::FactoidGen) {
    throw ConfigError("FactoidModel: preset '" + preset_.name + "' is not a generative preset");
  }
  generation_.validate();
  encoder_config_.vocab_size = vocab_.size();
  encoder_config_.validate();
  const FactoidPreset& p = preset_.factoid;
  if (!p.use_a && !p.use_b) throw ConfigError("FactoidModel: preset uses no encoder");
  // distinct seeds realize the two pretrained roles
  if (p.use_a) enc_a_ = std::make_unique<EncoderModel>(encoder_config_, seed * 2654435761u + 1);
  if (p.use_b) enc_b_ = std::make_unique<EncoderModel>(encoder_config_, seed * 2654435761u + 2);
  if (p.use_gate) {
    if (!p.use_a || !p.use_b) throw ConfigError("FactoidModel: gate needs both encoders");
    gate_ = std::make_unique<CnnWeighter>(encoder_config_.d_model, seed * 2654435761u + 3);
  }
}

ParamMap FactoidModel::named_parameters() {
  ParamMap params;
  if (enc_a_) {
    for (auto& kv : enc_a_->named_parameters("encA.")) params.push_back(kv);
  }
  if (enc_b_) {
    for (auto& kv : enc_b_->named_parameters("encB.")) params.push_back(kv);
  }
  if (gate_) {
    for (auto& kv : gate_->named_parameters("gate.")) params.push_back(kv);
  }
  return params;
}

std::vector<std::string> FactoidModel::frozen_groups() const {
  std::vector<std::string> groups;
  if (preset_.factoid.freeze_a) groups.push_back("encA");
  if (preset_.factoid.freeze_b) groups.push_back("encB");
  return groups;
}

const Tensor& FactoidModel::output_embedding() const {
  const FactoidPreset& p = preset_.factoid;
  // tie the logit projection to a trainable branch when exactly one is frozen
  if (p.use_a && p.use_b && p.freeze_a && !p.freeze_b) return enc_b_->word_embedding;
  if (enc_a_) return enc_a_->word_embedding;
  return enc_b_->word_embedding;
}

Tensor FactoidModel::features(Tape* tape, const TokenSequence& seq, const Tensor& mask,
                              bool training, std::mt19937_64* rng) const {
  const FactoidPreset& p = preset_.factoid;
  if (!p.use_b) return encode(tape, seq, *enc_a_, &mask, training, rng);
  if (!p.use_a) return encode(tape, seq, *enc_b_, &mask, training, rng);

  Tensor fa = encode(tape, seq, *enc_a_, &mask, training, rng);
  Tensor fb = encode(tape, seq, *enc_b_, &mask, training, rng);
  if (!p.use_gate) {
    return scale(tape, add(tape, fa, fb), 0.5);
  }
  auto [w1, w2] = cnn_weights(tape, fa, fb, *gate_, training, rng);
  return weighted_combine(tape, fa, fb, w1, w2);
}

Tensor FactoidModel::instance_loss(Tape* tape, const FactoidInstance& instance, bool training,
                                   std::mt19937_64* rng) const {
  TokenSequence seq = build_source(instance.question, instance.context, vocab_,
                                   encoder_config_.max_len, generation_.max_answer_len);
  std::size_t src_len = seq.length();

  std::vector<std::size_t> answer_ids = encode(instance.answer, vocab_);
  if (answer_ids.size() > generation_.max_answer_len - 1) {
    answer_ids.resize(generation_.max_answer_len - 1);
  }
  std::vector<std::size_t> targets = answer_ids;
  targets.push_back(generation_.stop_id);

  for (std::size_t id : answer_ids) {
    seq.ids.push_back(id);
    seq.segments.push_back(1);
    seq.mask.push_back(1);
  }
  Tensor mask = build_seq2seq_mask(src_len, answer_ids.size());
  Tensor feats = features(tape, seq, mask, training, rng);
  return generation_loss(tape, feats, output_embedding(), src_len, targets);
}

std::string FactoidModel::answer(const std::string& question, const std::string& context) const {
  TokenSequence prefix = build_source(question, context, vocab_, encoder_config_.max_len,
                                      generation_.max_answer_len);
  std::size_t src_len = prefix.length();
  std::vector<std::size_t> generated;
  for (std::size_t step = 0; step < generation_.max_answer_len; ++step) {
    Tensor mask = build_seq2seq_mask(src_len, prefix.length() - src_len);
    Tensor feats = features(nullptr, prefix, mask, false, nullptr);
    Tensor logits = next_token_logits(nullptr, feats, output_embedding());
    std::size_t limit = std::min(vocab_.size(), logits.size());
    std::size_t next = argmax_lowest(logits.data().subspan(0, limit));
    if (next == generation_.stop_id) break;
    generated.push_back(next);
    prefix.ids.push_back(next);
    prefix.segments.push_back(1);
    prefix.mask.push_back(1);
  }
  return decode(generated, vocab_);
}

// ---------------------------------------------------------------------------
// ClozeModel

ClozeModel::ClozeModel(ClozeKind kind, EncoderConfig encoder_config, Vocab vocab,
                       std::uint64_t seed)
    : kind_(kind), encoder_config_(encoder_config), vocab_(std::move(vocab)) {
  encoder_config_.vocab_size = vocab_.size();
  encoder_config_.validate();
  bool need_a = kind_ != ClozeKind::EncB;
  bool need_b = kind_ == ClozeKind::EncB || kind_ == ClozeKind::MlpFused;
  if (need_a) enc_a_ = std::make_unique<EncoderModel>(encoder_config_, seed * 2654435761u + 1);
  if (need_b) enc_b_ = std::make_unique<EncoderModel>(encoder_config_, seed * 2654435761u + 2);
  if (kind_ == ClozeKind::MlpFused) {
    mlp_ = std::make_unique<MlpFuser>(encoder_config_.d_model, seed * 2654435761u + 3);
  }
}

ParamMap ClozeModel::named_parameters() {
  ParamMap params;
  if (enc_a_) {
    for (auto& kv : enc_a_->named_parameters("encA.")) params.push_back(kv);
  }
  if (enc_b_) {
    for (auto& kv : enc_b_->named_parameters("encB.")) params.push_back(kv);
  }
  if (mlp_) {
    for (auto& kv : mlp_->named_parameters("mlp.")) params.push_back(kv);
  }
  return params;
}

ClozeModel::Encoded ClozeModel::encode_instance(const ClozeInstance& instance) const {
  Encoded enc;
  enc.passage_seq = encode_text(instance.passage, vocab_, encoder_config_.max_len);
  std::size_t n = enc.passage_seq.length() - 2;  // tokens between [CLS] and [SEP]

  enc.occurrences.resize(instance.candidates.size());
  for (std::size_t c = 0; c < instance.candidates.size(); ++c) {
    auto id = vocab_.lookup(instance.candidates[c]);
    if (!id) {
      throw DataError("cloze instance '" + instance.id + "': candidate '" +
                      instance.candidates[c] + "' missing from the vocabulary");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (enc.passage_seq.ids[j + 1] == *id) enc.occurrences[c].push_back(j);
    }
  }
  if (enc.occurrences[instance.answer_index].empty()) {
    throw DataError("cloze instance '" + instance.id +
                    "': gold candidate truncated out of the passage window");
  }
  return enc;
}

std::pair<Tensor, Tensor> ClozeModel::doc_attention(Tape* tape, const Encoded& enc,
                                                    const ClozeInstance& instance, bool training,
                                                    std::mt19937_64* rng) const {
  (void)instance;
  std::size_t n = enc.passage_seq.length() - 2;
  const EncoderModel& doc_encoder = kind_ == ClozeKind::EncB ? *enc_b_ : *enc_a_;

  Tensor passage_feats = encode(tape, enc.passage_seq, doc_encoder, nullptr, training, rng);
  std::vector<std::size_t> token_rows(n);
  for (std::size_t j = 0; j < n; ++j) token_rows[j] = j + 1;
  Tensor doc_rows = rows(tape, passage_feats, token_rows);

  TokenSequence query_seq = encode_text(instance.query, vocab_, encoder_config_.max_len);
  Tensor query_feats = encode(tape, query_seq, doc_encoder, nullptr, training, rng);

  Tensor s;
  if (kind_ == ClozeKind::Aoa || kind_ == ClozeKind::MlpFused) {
    std::size_t m = query_seq.length() - 2;
    std::vector<std::size_t> qry_rows(m);
    for (std::size_t j = 0; j < m; ++j) qry_rows[j] = j + 1;
    Tensor qry_emb = rows(tape, query_feats, qry_rows);
    AoAState state = aoa_scores(tape, match_matrix(tape, doc_rows, qry_emb));
    s = state.scores;
  } else {
    // single-encoder baseline: one attention from the pooled query
    Tensor pooled = pooled_feature(tape, query_feats);
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(encoder_config_.d_model));
    Tensor scores = scale(
        tape, matmul(tape, doc_rows, reshape(tape, pooled, {encoder_config_.d_model, 1})),
        inv_sqrt_d);
    s = reshape(tape, softmax(tape, scores, 0), {n});
  }
  return {s, doc_rows};
}

Tensor ClozeModel::fused_scores(Tape* tape, const ClozeInstance& instance, bool training,
                                std::mt19937_64* rng) const {
  Encoded enc = encode_instance(instance);
  auto [s, doc_rows] = doc_attention(tape, enc, instance, training, rng);
  std::size_t n = doc_rows.dim(0);
  // AoA branch feature: s-weighted average of the doc embeddings
  Tensor aoa_feat =
      reshape(tape, matmul(tape, reshape(tape, s, {1, n}), doc_rows), {encoder_config_.d_model});

  TokenSequence pair_seq =
      build_source(instance.query, instance.passage, vocab_, encoder_config_.max_len, 0);
  Tensor pair_feats = encode(tape, pair_seq, *enc_b_, nullptr, training, rng);
  Tensor general_feat = pooled_feature(tape, pair_feats);

  return mlp_scores(tape, aoa_feat, general_feat, *mlp_);
}

Tensor ClozeModel::instance_loss(Tape* tape, const ClozeInstance& instance, bool training,
                                 std::mt19937_64* rng) const {
  if (kind_ == ClozeKind::MlpFused) {
    Tensor scores = fused_scores(tape, instance, training, rng);
    std::size_t k = instance.candidates.size();
    std::vector<std::size_t> slots(k);
    for (std::size_t i = 0; i < k; ++i) slots[i] = i;
    Tensor valid = rows(tape, scores, slots);
    return cross_entropy(tape, reshape(tape, valid, {1, k}), {instance.answer_index});
  }
  Encoded enc = encode_instance(instance);
  auto [s, doc_rows] = doc_attention(tape, enc, instance, training, rng);
  Tensor cand = candidate_scores(tape, s, enc.occurrences);
  return cloze_nll(tape, cand, instance.answer_index);
}

std::size_t ClozeModel::predict(const ClozeInstance& instance) const {
  if (kind_ == ClozeKind::MlpFused) {
    Tensor scores = fused_scores(nullptr, instance, false, nullptr);
    std::vector<bool> valid(instance.candidates.size(), true);
    return select_candidate(scores.data().subspan(0, instance.candidates.size()), valid);
  }
  Encoded enc = encode_instance(instance);
  auto [s, doc_rows] = doc_attention(nullptr, enc, instance, false, nullptr);
  Tensor cand = candidate_scores(nullptr, s, enc.occurrences);
  return predict_candidate(cand);
}

// ---------------------------------------------------------------------------
// Training orchestration

namespace {

template <typename Model, typename Instance>
TrainOutcome run_training(Model& model, const std::vector<Instance>& train,
                          const FitConfig& config,
                          const std::vector<std::string>& freeze_groups,
                          const std::function<double()>& val_metric) {
  if (train.empty()) throw ConfigError("training set is empty");
  ParamMap all = model.named_parameters();
  ParamMap trainable = apply_freeze(all, FreezeSpec{freeze_groups});
  ParamMap frozen = frozen_partition(all, freeze_groups);

  TrainOutcome outcome;
  outcome.frozen_groups = freeze_groups;
  if (!frozen.empty()) outcome.frozen_hash_before = params_hash(frozen);

  std::vector<std::vector<double>> best = snapshot_params(trainable);

  FitHooks hooks;
  hooks.batch_loss = [&](Tape& tape, std::span<const std::size_t> batch, std::mt19937_64& rng) {
    Tensor total;
    for (std::size_t idx : batch) {
      Tensor one = model.instance_loss(&tape, train[idx], true, &rng);
      total = total.defined() ? add(&tape, total, one) : one;
    }
    return scale(&tape, total, 1.0 / static_cast<double>(batch.size()));
  };
  hooks.val_metric = val_metric;
  hooks.on_best = [&](std::size_t) { best = snapshot_params(trainable); };

  outcome.log = fit(train.size(), trainable, config, hooks);
  restore_params(trainable, best);  // finish on the best validation weights
  if (!frozen.empty()) outcome.frozen_hash_after = params_hash(frozen);
  return outcome;
}

}  // namespace

TrainOutcome train_factoid(FactoidModel& model, const std::vector<FactoidInstance>& train,
                           const std::vector<FactoidInstance>& val, const FitConfig& config) {
  const std::vector<FactoidInstance>& val_set = val.empty() ? train : val;
  auto val_metric = [&]() {
    double total = 0.0;
    for (const auto& inst : val_set) {
      total += model.instance_loss(nullptr, inst, false, nullptr).item();
    }
    return total / static_cast<double>(val_set.size());
  };
  return run_training(model, train, config, model.frozen_groups(), val_metric);
}

TrainOutcome train_cloze(ClozeModel& model, const std::vector<ClozeInstance>& train,
                         const std::vector<ClozeInstance>& val, const FitConfig& config) {
  const std::vector<ClozeInstance>& val_set = val.empty() ? train : val;
  auto val_metric = [&]() {
    std::size_t hits = 0;
    for (const auto& inst : val_set) {
      if (model.predict(inst) == inst.answer_index) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(val_set.size());
  };
  return run_training(model, train, config, {}, val_metric);
}

MetricReport eval_factoid(FactoidModel& model, const std::vector<FactoidInstance>& test) {
  if (test.empty()) throw ContractError("eval_factoid: empty test set");
  std::vector<MetricRow> rows(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const FactoidInstance& inst = test[i];
    TokenList cand = normalize_tokens(model.answer(inst.question, inst.context));
    TokenList ref = normalize_tokens(inst.answer);
    MetricRow row;
    row.rouge1 = rouge_n(cand, ref, 1).f1;
    row.rouge2 = rouge_n(cand, ref, 2).f1;
    row.rouge_l = rouge_l(cand, ref).f1;
    row.bleu = bleu(cand, ref);
    Prf prf = token_prf(cand, ref);
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.f1 = prf.f1;
    rows[i] = row;
  });
  return corpus_report(rows);
}

MetricReport eval_cloze(ClozeModel& model, const std::vector<ClozeInstance>& test) {
  if (test.empty()) throw ContractError("eval_cloze: empty test set");
  std::vector<MetricRow> rows(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const ClozeInstance& inst = test[i];
    std::size_t pred = model.predict(inst);
    MetricRow row;
    row.accuracy = pred == inst.answer_index ? 1.0 : 0.0;
    Prf prf = token_prf(normalize_tokens(inst.candidates[pred]),
                        normalize_tokens(inst.candidates[inst.answer_index]));
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.f1 = prf.f1;
    rows[i] = row;
  });
  return corpus_report(rows);
}

FitConfig default_fit_config(Method method) {
  FitConfig config;
  config.batch_size = 16;
  config.max_epochs = 50;
  config.early_stop.patience = 3;
  if (method == Method::FactoidGen) {
    config.optimizer.kind = OptimizerConfig::Kind::AdamW;
    config.early_stop.metric = EarlyStopConfig::Metric::ValLoss;
    config.early_stop.mode = EarlyStopConfig::Mode::Min;
  } else {
    config.optimizer.kind = OptimizerConfig::Kind::Adam;
    config.optimizer.weight_decay = 0.0;
    config.early_stop.metric = EarlyStopConfig::Metric::ValAccuracy;
    config.early_stop.mode = EarlyStopConfig::Mode::Max;
  }
  return config;
}

}  // namespace fusereader

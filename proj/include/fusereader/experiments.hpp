#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fusereader/aoa.hpp"
#include "fusereader/datasets.hpp"
#include "fusereader/fusion.hpp"
#include "fusereader/metrics.hpp"
#include "fusereader/training.hpp"
#include "fusereader/unilm.hpp"

namespace fusereader {

enum class Method { FactoidGen, ClozeAoA };

// Which branches a factoid (generative) preset uses, which are frozen, and
// whether the trainable CNN gate mixes them (the "+mlp" rows); dual presets
// without the gate average the branches with fixed equal weights.
struct FactoidPreset {
  bool use_a = true;
  bool use_b = false;
  bool freeze_a = false;
  bool freeze_b = false;
  bool use_gate = false;
};

enum class ClozeKind { EncA, EncB, Aoa, MlpFused };

struct PresetInfo {
  std::string name;  // canonical spelling
  Method method = Method::FactoidGen;
  FactoidPreset factoid;
  ClozeKind cloze = ClozeKind::Aoa;
};

// The eight generative rows plus the four cloze rows.
const std::vector<std::string>& factoid_preset_names();
const std::vector<std::string>& cloze_preset_names();

// Case-insensitive, accepts the bioA/bioB alias spelling.
PresetInfo resolve_preset(const std::string& name);

// Vocabulary over every text field of the dataset.
Vocab factoid_vocab(const std::vector<FactoidInstance>& items, std::size_t max_size = 8192);
Vocab cloze_vocab(const std::vector<ClozeInstance>& items, std::size_t max_size = 8192);

// Unpadded [CLS] text [SEP] sequence, truncated to max_len.
TokenSequence encode_text(const std::string& text, const Vocab& vocab, std::size_t max_len);

// Method 1: dual-encoder UniLM generator with optional CNN gating.
class FactoidModel {
 public:
  FactoidModel(const PresetInfo& preset, EncoderConfig encoder_config, Vocab vocab,
               GenerationConfig generation, std::uint64_t seed);

  const PresetInfo& preset() const { return preset_; }
  const Vocab& vocab() const { return vocab_; }
  const GenerationConfig& generation() const { return generation_; }
  const EncoderConfig& encoder_config() const { return encoder_config_; }

  ParamMap named_parameters();
  std::vector<std::string> frozen_groups() const;

  // Fused hidden states for a source+target prefix under the seq2seq mask.
  Tensor features(Tape* tape, const TokenSequence& seq, const Tensor& mask, bool training,
                  std::mt19937_64* rng) const;

  // Teacher-forced next-token loss for one instance.
  Tensor instance_loss(Tape* tape, const FactoidInstance& instance, bool training,
                       std::mt19937_64* rng) const;

  // Greedy generation; deterministic.
  std::string answer(const std::string& question, const std::string& context) const;

  EncoderModel* encoder_a() { return enc_a_.get(); }
  EncoderModel* encoder_b() { return enc_b_.get(); }
  CnnWeighter* gate() { return gate_.get(); }

 private:
  const Tensor& output_embedding() const;

  PresetInfo preset_;
  EncoderConfig encoder_config_;
  Vocab vocab_;
  GenerationConfig generation_;
  std::unique_ptr<EncoderModel> enc_a_, enc_b_;
  std::unique_ptr<CnnWeighter> gate_;
};

// Method 2: AoA scoring over the domain encoder, optionally fused with the
// general encoder through the MLP head.
class ClozeModel {
 public:
  ClozeModel(ClozeKind kind, EncoderConfig encoder_config, Vocab vocab, std::uint64_t seed);

  ClozeKind kind() const { return kind_; }
  const Vocab& vocab() const { return vocab_; }

  ParamMap named_parameters();

  Tensor instance_loss(Tape* tape, const ClozeInstance& instance, bool training,
                       std::mt19937_64* rng) const;
  std::size_t predict(const ClozeInstance& instance) const;

  EncoderModel* encoder_a() { return enc_a_.get(); }
  EncoderModel* encoder_b() { return enc_b_.get(); }
  MlpFuser* fuser() { return mlp_.get(); }

 private:
  struct Encoded {
    TokenSequence passage_seq;
    std::vector<std::vector<std::size_t>> occurrences;  // candidate -> doc rows
  };
  Encoded encode_instance(const ClozeInstance& instance) const;

  // Per-doc-token probability vector (n sums to 1) plus the doc feature rows.
  std::pair<Tensor, Tensor> doc_attention(Tape* tape, const Encoded& enc,
                                          const ClozeInstance& instance, bool training,
                                          std::mt19937_64* rng) const;
  Tensor fused_scores(Tape* tape, const ClozeInstance& instance, bool training,
                      std::mt19937_64* rng) const;

  ClozeKind kind_;
  EncoderConfig encoder_config_;
  Vocab vocab_;
  std::unique_ptr<EncoderModel> enc_a_, enc_b_;
  std::unique_ptr<MlpFuser> mlp_;
};

struct TrainOutcome {
  TrainingLog log;
  std::vector<std::string> frozen_groups;
  std::string frozen_hash_before, frozen_hash_after;  // empty when nothing frozen
};

TrainOutcome train_factoid(FactoidModel& model, const std::vector<FactoidInstance>& train,
                           const std::vector<FactoidInstance>& val, const FitConfig& config);
TrainOutcome train_cloze(ClozeModel& model, const std::vector<ClozeInstance>& train,
                         const std::vector<ClozeInstance>& val, const FitConfig& config);

MetricReport eval_factoid(FactoidModel& model, const std::vector<FactoidInstance>& test);
MetricReport eval_cloze(ClozeModel& model, const std::vector<ClozeInstance>& test);

// Method defaults: AdamW for the generator, Adam for the cloze models.
FitConfig default_fit_config(Method method);

}  // namespace fusereader

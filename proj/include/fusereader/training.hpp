#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fusereader/optim.hpp"

namespace fusereader {

// Parameter groups excluded from updates; a group freezes every parameter
// named "<group>" or "<group>.<...>".
struct FreezeSpec {
  std::vector<std::string> groups;
};

// Marks frozen tensors requires_grad=false (excluding them from grad
// recording) and returns the remaining trainable partition. Unknown group
// names are a config error.
ParamMap apply_freeze(ParamMap& params, const FreezeSpec& spec);

struct EarlyStopConfig {
  enum class Metric { ValLoss, ValF1, ValAccuracy };
  enum class Mode { Min, Max };

  std::size_t patience = 3;
  Metric metric = Metric::ValLoss;
  Mode mode = Mode::Min;

  void validate() const;
};

const char* early_stop_metric_name(EarlyStopConfig::Metric metric);

struct FitConfig {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  double clip_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  EarlyStopConfig early_stop;
};

struct TrainingRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps taken so far
  double train_loss = 0.0;
  double val_metric = 0.0;
  bool stopped = false;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool stopped_early = false;
};

// JSON lines, one record per epoch.
void write_training_log(const std::filesystem::path& path, const TrainingLog& log);

struct FitHooks {
  // Builds the mean batch loss on the tape for the given example indices.
  std::function<Tensor(Tape&, std::span<const std::size_t>, std::mt19937_64&)> batch_loss;
  // Monitored validation metric, evaluated once per epoch.
  std::function<double()> val_metric;
  // Invoked whenever the monitored metric improves (checkpoint-best hook).
  std::function<void(std::size_t epoch)> on_best;
};

// Minibatch epochs with per-epoch validation and patience-based early
// stopping; deterministic for a fixed seed. Throws NumericError annotated
// with the last completed step if the loss blows up.
TrainingLog fit(std::size_t train_size, ParamMap& trainable, const FitConfig& config,
                const FitHooks& hooks);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Deterministic shuffled partition by (train, val, test) ratios.
SplitIndices split_dataset(std::size_t count, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);

}  // namespace fusereader

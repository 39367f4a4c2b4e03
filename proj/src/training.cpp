#include "fusereader/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

namespace fusereader {

ParamMap apply_freeze(ParamMap& params, const FreezeSpec& spec) {
  auto in_group = [](const std::string& name, const std::string& group) {
    return name == group ||
           (name.size() > group.size() && name.compare(0, group.size(), group) == 0 &&
            name[group.size()] == '.');
  };
  for (const std::string& group : spec.groups) {
    bool matched = false;
    for (auto& [name, tensor] : params) {
      if (in_group(name, group)) {
        tensor.set_requires_grad(false);
        tensor.clear_grad();
        matched = true;
      }
    }
    if (!matched) throw ConfigError("freeze: unknown parameter group '" + group + "'");
  }
  ParamMap trainable;
  for (auto& [name, tensor] : params) {
    bool frozen = false;
    for (const std::string& group : spec.groups) frozen = frozen || in_group(name, group);
    if (!frozen) trainable.emplace_back(name, tensor);
  }
  return trainable;
}

void EarlyStopConfig::validate() const {
  if (patience < 1) throw ConfigError("early stop: patience must be >= 1");
}

const char* early_stop_metric_name(EarlyStopConfig::Metric metric) {
  switch (metric) {
    case EarlyStopConfig::Metric::ValLoss:
      return "val_loss";
    case EarlyStopConfig::Metric::ValF1:
      return "val_f1";
    case EarlyStopConfig::Metric::ValAccuracy:
      return "val_accuracy";
  }
  return "val_loss";
}

void write_training_log(const std::filesystem::path& path, const TrainingLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const TrainingRecord& rec : log.records) {
    nlohmann::json line{{"epoch", rec.epoch},
                        {"step", rec.step},
                        {"train_loss", rec.train_loss},
                        {"val_metric", rec.val_metric},
                        {"stopped", rec.stopped}};
    out << line.dump() << "\n";
  }
}

TrainingLog fit(std::size_t train_size, ParamMap& trainable, const FitConfig& config,
                const FitHooks& hooks) {
  if (train_size == 0) throw ConfigError("fit: empty training set");
  if (config.batch_size == 0) throw ConfigError("fit: batch_size must be positive");
  if (config.max_epochs == 0) throw ConfigError("fit: max_epochs must be positive");
  config.optimizer.validate();
  config.early_stop.validate();
  if (!hooks.batch_loss || !hooks.val_metric) throw ConfigError("fit: missing hooks");

  Optimizer optimizer(config.optimizer);
  std::mt19937_64 rng(config.seed);
  bool minimize = config.early_stop.mode == EarlyStopConfig::Mode::Min;

  TrainingLog log;
  log.best_metric = minimize ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
  std::size_t bad_streak = 0;
  std::size_t global_step = 0;

  std::vector<std::size_t> order(train_size);
  for (std::size_t i = 0; i < train_size; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_size; start += config.batch_size) {
      std::size_t stop = std::min(train_size, start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      Tape tape;
      try {
        Tensor loss = hooks.batch_loss(tape, batch, rng);
        tape.backward(loss);
        loss_sum += loss.item();
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (last good step " +
                           std::to_string(global_step) + ")");
      }
      if (config.clip_norm > 0.0) clip_global_norm(trainable, config.clip_norm);
      optimizer.step(trainable);
      Optimizer::zero_grad(trainable);
      global_step += 1;
      batches += 1;
    }

    TrainingRecord rec;
    rec.epoch = epoch;
    rec.step = global_step;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_metric = hooks.val_metric();

    bool improved = minimize ? rec.val_metric < log.best_metric : rec.val_metric > log.best_metric;
    if (improved) {
      log.best_metric = rec.val_metric;
      log.best_epoch = epoch;
      bad_streak = 0;
      if (hooks.on_best) hooks.on_best(epoch);
    } else {
      bad_streak += 1;
    }
    rec.stopped = bad_streak >= config.early_stop.patience;
    log.records.push_back(rec);
    if (rec.stopped) {
      log.stopped_early = true;
      break;
    }
  }
  return log;
}

SplitIndices split_dataset(std::size_t count, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed) {
  if (count < 3) throw ConfigError("split_dataset: need at least 3 items");
  if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0) {
    throw ConfigError("split_dataset: ratios must be positive");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-6) {
    throw ConfigError("split_dataset: ratios must sum to 1");
  }
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(count)));
  auto n_val = static_cast<std::size_t>(std::llround(val_ratio * static_cast<double>(count)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= count) {
    throw ConfigError("split_dataset: ratios leave an empty split");
  }
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

}  // namespace fusereader

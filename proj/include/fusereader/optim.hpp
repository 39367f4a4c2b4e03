#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusereader/encoder.hpp"

namespace fusereader {

struct OptimizerConfig {
  enum class Kind { Adam, AdamW };
  Kind kind = Kind::AdamW;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled decay, AdamW only

  void validate() const;
};

// Adam/AdamW with bias correction; moment state is keyed by parameter name.
// Parameters with requires_grad=false are skipped entirely (no state).
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps() const { return t_; }

  // One update over the registry. A trainable parameter without a populated
  // gradient is a contract error.
  void step(ParamMap& params);

  static void zero_grad(ParamMap& params);

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimizerConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

// Scales gradients so their global L2 norm is at most max_norm.
void clip_global_norm(ParamMap& params, double max_norm);

}  // namespace fusereader

#include "fusereader/optim.hpp"

#include <cmath>

namespace fusereader {

void OptimizerConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("optimizer: lr must be positive");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw ConfigError("optimizer: betas must be in (0, 1)");
  }
  if (eps <= 0.0) throw ConfigError("optimizer: eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be non-negative");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  config_.validate();
}

void Optimizer::step(ParamMap& params) {
  t_ += 1;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

  for (auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    if (!tensor.has_grad()) {
      throw ContractError("optimizer: trainable parameter '" + name + "' has no gradient");
    }
    auto& moments = state_[name];
    if (moments.m.empty()) {
      moments.m.assign(tensor.size(), 0.0);
      moments.v.assign(tensor.size(), 0.0);
    }
    auto grad = tensor.grad();
    auto data = tensor.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double g = grad[i];
      moments.m[i] = config_.beta1 * moments.m[i] + (1.0 - config_.beta1) * g;
      moments.v[i] = config_.beta2 * moments.v[i] + (1.0 - config_.beta2) * g * g;
      double m_hat = moments.m[i] / bc1;
      double v_hat = moments.v[i] / bc2;
      double update = config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      if (config_.kind == OptimizerConfig::Kind::AdamW) {
        update += config_.lr * config_.weight_decay * data[i];
      }
      data[i] -= update;
    }
    tensor.check_finite("optimizer step");
  }
}

void Optimizer::zero_grad(ParamMap& params) {
  for (auto& [name, tensor] : params) tensor.clear_grad();
}

void clip_global_norm(ParamMap& params, double max_norm) {
  if (max_norm <= 0.0) throw ParameterError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (auto& [name, tensor] : params) {
    if (!tensor.has_grad()) continue;
    for (double g : tensor.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  double factor = max_norm / norm;
  for (auto& [name, tensor] : params) {
    if (!tensor.has_grad()) continue;
    auto& grad = *tensor.impl().grad;
    for (double& g : grad) g *= factor;
  }
}

}  // namespace fusereader

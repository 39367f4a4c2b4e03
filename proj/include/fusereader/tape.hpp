#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fusereader/tensor.hpp"

namespace fusereader {

// Per-pass gradient buffers. Backward propagates through these and only at
// the end folds them into the persistent .grad of requires_grad tensors, so
// calling backward twice adds exactly one more copy of the gradients.
class GradFlow {
 public:
  std::vector<double>& at(const std::shared_ptr<TensorImpl>& t);
  const std::vector<double>* find(const TensorImpl* t) const;

  const std::unordered_map<TensorImpl*, std::vector<double>>& entries() const { return flows_; }

 private:
  friend class Tape;
  std::unordered_map<TensorImpl*, std::vector<double>> flows_;
  std::vector<std::shared_ptr<TensorImpl>> keep_alive_;
};

// Reverse-mode tape. Operations are appended in execution order, which is a
// topological order of the graph by construction; backward walks the list
// once in reverse. A tape must stay on one logical thread.
class Tape {
 public:
  using PullFn = std::function<void(GradFlow&)>;

  void record(std::shared_ptr<TensorImpl> output, PullFn pull);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad tensor reachable from `loss`.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return ops_.size(); }
  bool produced(const TensorImpl* t) const { return outputs_.count(t) > 0; }
  void clear();

 private:
  struct Op {
    std::shared_ptr<TensorImpl> output;
    PullFn pull;
  };
  std::vector<Op> ops_;
  std::unordered_set<const TensorImpl*> outputs_;
};

}  // namespace fusereader

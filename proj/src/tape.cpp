#include "fusereader/tape.hpp"

namespace fusereader {

std::vector<double>& GradFlow::at(const std::shared_ptr<TensorImpl>& t) {
  auto it = flows_.find(t.get());
  if (it == flows_.end()) {
    keep_alive_.push_back(t);
    it = flows_.emplace(t.get(), std::vector<double>(t->data.size(), 0.0)).first;
  }
  return it->second;
}

const std::vector<double>* GradFlow::find(const TensorImpl* t) const {
  auto it = flows_.find(const_cast<TensorImpl*>(t));
  return it == flows_.end() ? nullptr : &it->second;
}

void Tape::record(std::shared_ptr<TensorImpl> output, PullFn pull) {
  outputs_.insert(output.get());
  ops_.push_back({std::move(output), std::move(pull)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar()) {
    throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!produced(loss.ptr().get())) {
    throw ContractError("backward: loss tensor was not produced on this tape");
  }

  GradFlow flow;
  flow.at(loss.ptr())[0] = 1.0;

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (flow.find(it->output.get()) != nullptr) {
      it->pull(flow);
    }
  }

  for (auto& [impl, values] : flow.flows_) {
    if (!impl->requires_grad) continue;
    if (!impl->grad) impl->grad.emplace(impl->data.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) (*impl->grad)[i] += values[i];
  }
}

void Tape::clear() {
  ops_.clear();
  outputs_.clear();
}

}  // namespace fusereader

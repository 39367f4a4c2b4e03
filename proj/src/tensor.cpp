#include "fusereader/tensor.hpp"

#include <cmath>
#include <sstream>

namespace fusereader {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace {

void validate_shape(const Shape& shape, std::size_t numel) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != numel) {
    throw DimensionError("shape " + shape_str(shape) + " does not match buffer of " +
                         std::to_string(numel) + " elements");
  }
}

}  // namespace

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape, data.size());
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  Tensor t(std::move(impl));
  t.check_finite("Tensor::from");
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(n);
  for (double& v : data) v = dist(rng);
  return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                       bool requires_grad) {
  std::size_t n = shape_numel(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(n);
  for (double& v : data) v = dist(rng);
  return from(std::move(shape), std::move(data), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank()));
  }
  return impl().shape[axis];
}

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
  return impl().data[0];
}

double Tensor::operator()(std::size_t i) const {
  return impl().data.at(i);
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
  const TensorImpl& t = impl();
  return t.data[i * t.shape[1] + j];
}

double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) const {
  const TensorImpl& t = impl();
  return t.data[(i * t.shape[1] + j) * t.shape[2] + k];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl().requires_grad = value;
  return *this;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("gradient not populated; call Tape::backward first");
  return *impl().grad;
}

void Tensor::accumulate_grad(std::span<const double> delta) {
  TensorImpl& t = impl();
  if (delta.size() != t.data.size()) throw DimensionError("gradient size mismatch");
  if (!t.grad) t.grad.emplace(t.data.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) (*t.grad)[i] += delta[i];
}

void Tensor::clear_grad() {
  impl().grad.reset();
}

void Tensor::check_finite(const char* where) const {
  for (double v : impl().data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(where) + ": non-finite value in tensor " + shape_str(shape()));
    }
  }
}

TensorImpl& Tensor::impl() {
  if (!impl_) throw ContractError("use of default-constructed tensor");
  return *impl_;
}

const TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of default-constructed tensor");
  return *impl_;
}

}  // namespace fusereader

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fusereader/errors.hpp"

namespace fusereader {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;  // row-major
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;
};

// Handle with shared storage: copies alias the same buffer, which is what
// lets the tape hold on to operands and accumulate gradients into leaves.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t size() const { return impl().data.size(); }
  std::size_t dim(std::size_t axis) const;
  bool is_scalar() const { return defined() && impl().data.size() == 1; }

  std::span<const double> data() const { return impl().data; }
  std::span<double> mutable_data() { return impl().data; }
  double item() const;

  double operator()(std::size_t i) const;
  double operator()(std::size_t i, std::size_t j) const;
  double operator()(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool value);

  bool has_grad() const { return defined() && impl().grad.has_value(); }
  std::span<const double> grad() const;
  void accumulate_grad(std::span<const double> delta);
  void clear_grad();

  // Contract check: throws NumericError naming `where` on any NaN/Inf.
  void check_finite(const char* where) const;

  TensorImpl& impl();
  const TensorImpl& impl() const;
  const std::shared_ptr<TensorImpl>& ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<TensorImpl> impl_;
};

}  // namespace fusereader

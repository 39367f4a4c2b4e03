#include "fusereader/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace fusereader {

namespace {

bool want_grad(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(Shape shape, std::vector<double> data, bool requires_grad, const char* where) {
  Tensor out = Tensor::from(std::move(shape), std::move(data), requires_grad);
  out.check_finite(where);
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Decomposes iteration over slices along `axis`: element (o, j, i) lives at
// (o * d + j) * inner + i.
struct AxisSpan {
  std::size_t outer, d, inner;
};

AxisSpan axis_span(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSpan s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

constexpr double kGeluCoef = 0.044715;
const double kGeluScale = std::sqrt(2.0 / M_PI);

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  bool rg = want_grad(tape, {&a, &b});
  Tensor y = make_output(a.shape(), std::move(out), rg, "add");
  if (rg) {
    tape->record(y.ptr(), [ap = a.ptr(), bp = b.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (ap->requires_grad) {
        auto& ga = f.at(ap);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return y;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  bool rg = want_grad(tape, {&a, &b});
  Tensor y = make_output(a.shape(), std::move(out), rg, "sub");
  if (rg) {
    tape->record(y.ptr(), [ap = a.ptr(), bp = b.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (ap->requires_grad) {
        auto& ga = f.at(ap);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return y;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  bool rg = want_grad(tape, {&a, &b});
  Tensor y = make_output(a.shape(), std::move(out), rg, "mul");
  if (rg) {
    tape->record(y.ptr(), [ap = a.ptr(), bp = b.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (ap->requires_grad) {
        auto& ga = f.at(ap);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bp->data[i];
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ap->data[i];
      }
    });
  }
  return y;
}

Tensor scale(Tape* tape, const Tensor& x, double c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.data()[i];
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "scale");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), c](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
    });
  }
  return y;
}

Tensor scalar_mul(Tape* tape, const Tensor& s, const Tensor& x) {
  if (!s.is_scalar()) throw DimensionError("scalar_mul: weight must be a single element");
  double sv = s.data()[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x.data()[i];
  bool rg = want_grad(tape, {&s, &x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "scalar_mul");
  if (rg) {
    tape->record(y.ptr(), [sp = s.ptr(), xp = x.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (sp->requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xp->data[i];
        f.at(sp)[0] += acc;
      }
      if (xp->requires_grad) {
        auto& gx = f.at(xp);
        double sv = sp->data[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
      }
    });
  }
  return y;
}

Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: expected [n x d] + [d], got " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
  }
  std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.data()[i * d + j] + bias.data()[j];
  }
  bool rg = want_grad(tape, {&x, &bias});
  Tensor y = make_output(x.shape(), std::move(out), rg, "add_bias");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), bp = bias.ptr(), yp = y.ptr(), n, d](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (xp->requires_grad) {
        auto& gx = f.at(xp);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
      }
    });
  }
  return y;
}

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* yrow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
    }
  }
  bool rg = want_grad(tape, {&a, &b});
  Tensor y = make_output({m, n}, std::move(out), rg, "matmul");
  if (rg) {
    tape->record(y.ptr(), [ap = a.ptr(), bp = b.ptr(), yp = y.ptr(), m, k, n](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (ap->requires_grad) {
        auto& ga = f.at(ap);  // dA = g . B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = g.data() + i * n;
            const double* brow = bp->data.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);  // dB = A^T . g
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            double aip = ap->data[i * k + p];
            if (aip == 0.0) continue;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return y;
}

Tensor transpose(Tape* tape, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + shape_str(x.shape()));
  std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x.data()[i * m + j];
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({m, n}, std::move(out), rg, "transpose");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), n, m](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[j * n + i];
      }
    });
  }
  return y;
}

Tensor reshape(Tape* tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(std::move(shape), {x.data().begin(), x.data().end()}, rg, "reshape");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return y;
}

Tensor rows(Tape* tape, const Tensor& x, const std::vector<std::size_t>& indices) {
  if (x.rank() < 1) throw DimensionError("rows: input must have rank >= 1");
  if (indices.empty()) throw DimensionError("rows: empty index list");
  std::size_t n = x.dim(0);
  std::size_t width = x.size() / n;
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw IndexError("rows: index " + std::to_string(idx) + " out of range for dim " +
                       std::to_string(n));
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = indices.size();
  std::vector<double> out(indices.size() * width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(x.data().data() + indices[r] * width, width, out.data() + r * width);
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(std::move(out_shape), std::move(out), rg, "rows");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), indices, width](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) gx[indices[r] * width + c] += g[r * width + c];
      }
    });
  }
  return y;
}

Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Shape& first = parts.front().shape();
  std::size_t total_rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) throw DimensionError("concat_rows: rank mismatch");
    for (std::size_t a = 1; a < first.size(); ++a) {
      if (p.shape()[a] != first[a]) {
        throw DimensionError("concat_rows: trailing dims differ: " + shape_str(p.shape()) +
                             " vs " + shape_str(first));
      }
    }
    total_rows += p.dim(0);
  }
  std::size_t width = parts.front().size() / first[0];
  Shape out_shape = first;
  out_shape[0] = total_rows;
  std::vector<double> out;
  out.reserve(total_rows * width);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());

  bool rg = false;
  for (const Tensor& p : parts) rg = rg || want_grad(tape, {&p});
  Tensor y = make_output(std::move(out_shape), std::move(out), rg, "concat_rows");
  if (rg) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const Tensor& p : parts) impls.push_back(p.ptr());
    tape->record(y.ptr(), [impls, yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      std::size_t offset = 0;
      for (const auto& part : impls) {
        std::size_t len = part->data.size();
        if (part->requires_grad) {
          auto& gp = f.at(part);
          for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
        }
        offset += len;
      }
    });
  }
  return y;
}

Tensor select(Tape* tape, const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.size()) {
    throw IndexError("select: index " + std::to_string(flat_index) + " out of range");
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({1}, {x.data()[flat_index]}, rg, "select");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), flat_index](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      f.at(xp)[flat_index] += g[0];
    });
  }
  return y;
}

Tensor sum(Tape* tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({1}, {acc}, rg, "sum");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (double& v : gx) v += g[0];
    });
  }
  return y;
}

Tensor mean(Tape* tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  double n = static_cast<double>(x.size());
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({1}, {acc / n}, rg, "mean");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), n](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (double& v : gx) v += g[0] / n;
    });
  }
  return y;
}

Tensor mean_axis0(Tape* tape, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("mean_axis0: expected rank 2, got " + shape_str(x.shape()));
  std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j] += x.data()[i * m + j];
  }
  for (double& v : out) v /= static_cast<double>(n);
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({m}, std::move(out), rg, "mean_axis0");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), n, m](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[j] / static_cast<double>(n);
      }
    });
  }
  return y;
}

Tensor gather_sum(Tape* tape, const Tensor& x,
                  const std::vector<std::vector<std::size_t>>& groups) {
  if (x.rank() != 1) throw DimensionError("gather_sum: expected rank 1, got " + shape_str(x.shape()));
  std::vector<double> out(groups.size(), 0.0);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (std::size_t p : groups[k]) {
      if (p >= x.size()) {
        throw IndexError("gather_sum: position " + std::to_string(p) + " out of range");
      }
      out[k] += x.data()[p];
    }
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({groups.size()}, std::move(out), rg, "gather_sum");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), groups](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t k = 0; k < groups.size(); ++k) {
        for (std::size_t p : groups[k]) gx[p] += g[k];
      }
    });
  }
  return y;
}

namespace {

// Shared backward rule for (masked) softmax: dx = y * (g - <g, y>) per slice.
void softmax_pull(const std::shared_ptr<TensorImpl>& xp, const std::shared_ptr<TensorImpl>& yp,
                  AxisSpan s, GradFlow& f) {
  const auto& g = *f.find(yp.get());
  if (!xp->requires_grad) return;
  auto& gx = f.at(xp);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        dot += g[idx] * yp->data[idx];
      }
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        gx[idx] += yp->data[idx] * (g[idx] - dot);
      }
    }
  }
}

}  // namespace

Tensor softmax(Tape* tape, const Tensor& x, std::size_t axis) {
  AxisSpan s = axis_span(x.shape(), axis, "softmax");
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.d; ++j) {
        mx = std::max(mx, x.data()[(o * s.d + j) * s.inner + i]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        out[idx] = std::exp(x.data()[idx] - mx);
        total += out[idx];
      }
      for (std::size_t j = 0; j < s.d; ++j) out[(o * s.d + j) * s.inner + i] /= total;
    }
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "softmax");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), s](GradFlow& f) { softmax_pull(xp, yp, s, f); });
  }
  return y;
}

Tensor masked_softmax(Tape* tape, const Tensor& x, const Tensor& mask, std::size_t axis) {
  require_same_shape(x, mask, "masked_softmax");
  for (double m : mask.data()) {
    if (m != 0.0 && m != 1.0) throw ParameterError("masked_softmax: mask entries must be 0 or 1");
  }
  AxisSpan s = axis_span(x.shape(), axis, "masked_softmax");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        if (mask.data()[idx] == 1.0) mx = std::max(mx, x.data()[idx]);
      }
      if (!std::isfinite(mx)) {
        throw ContractError("masked_softmax: slice with no admissible entries");
      }
      double total = 0.0;
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        if (mask.data()[idx] == 1.0) {
          out[idx] = std::exp(x.data()[idx] - mx);
          total += out[idx];
        }
      }
      for (std::size_t j = 0; j < s.d; ++j) {
        std::size_t idx = (o * s.d + j) * s.inner + i;
        if (mask.data()[idx] == 1.0) out[idx] /= total;
      }
    }
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "masked_softmax");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), s](GradFlow& f) { softmax_pull(xp, yp, s, f); });
  }
  return y;
}

Tensor activation(Tape* tape, const Tensor& x, Activation kind) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = x.data()[i];
    switch (kind) {
      case Activation::Tanh:
        out[i] = std::tanh(v);
        break;
      case Activation::Gelu: {
        double inner = kGeluScale * (v + kGeluCoef * v * v * v);
        out[i] = 0.5 * v * (1.0 + std::tanh(inner));
        break;
      }
      case Activation::Relu:
        out[i] = v > 0.0 ? v : 0.0;
        break;
    }
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "activation");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), kind](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double v = xp->data[i];
        double d = 0.0;
        switch (kind) {
          case Activation::Tanh: {
            double t = yp->data[i];
            d = 1.0 - t * t;
            break;
          }
          case Activation::Gelu: {
            double t = std::tanh(kGeluScale * (v + kGeluCoef * v * v * v));
            d = 0.5 * (1.0 + t) +
                0.5 * v * (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCoef * v * v);
            break;
          }
          case Activation::Relu:
            d = v > 0.0 ? 1.0 : 0.0;
            break;
        }
        gx[i] += g[i] * d;
      }
    });
  }
  return y;
}

Tensor tensor_log(Tape* tape, const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x.data()[i]);
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "log");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr()](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xp->data[i];
    });
  }
  return y;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.rank() != 2 || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != x.dim(1) ||
      beta.dim(0) != x.dim(1)) {
    throw DimensionError("layer_norm: expected x [n x d] with gamma/beta [d]");
  }
  std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data().data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = gamma.data()[j] * xhat[i * d + j] + beta.data()[j];
    }
  }
  bool rg = want_grad(tape, {&x, &gamma, &beta});
  Tensor y = make_output(x.shape(), std::move(out), rg, "layer_norm");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), gp = gamma.ptr(), bp = beta.ptr(), yp = y.ptr(),
                           xhat = std::move(xhat), inv_std = std::move(inv_std), n, d](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (gp->requires_grad) {
        auto& gg = f.at(gp);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
        }
      }
      if (bp->requires_grad) {
        auto& gb = f.at(bp);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
      }
      if (xp->requires_grad) {
        auto& gx = f.at(xp);
        for (std::size_t i = 0; i < n; ++i) {
          double mean_a = 0.0, mean_ax = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double a = g[i * d + j] * gp->data[j];
            mean_a += a;
            mean_ax += a * xhat[i * d + j];
          }
          mean_a /= static_cast<double>(d);
          mean_ax /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double a = g[i * d + j] * gp->data[j];
            gx[i * d + j] += inv_std[i] * (a - mean_a - xhat[i * d + j] * mean_ax);
          }
        }
      }
    });
  }
  return y;
}

Tensor conv1d(Tape* tape, const Tensor& x, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 2) throw DimensionError("conv1d: input must be [c_in x L]");
  if (kernels.rank() != 3) throw DimensionError("conv1d: kernels must be [c_out x c_in x k]");
  if (stride == 0) throw ParameterError("conv1d: stride must be positive");
  std::size_t c_in = x.dim(0), L = x.dim(1);
  std::size_t c_out = kernels.dim(0), kw = kernels.dim(2);
  if (kernels.dim(1) != c_in) {
    throw DimensionError("conv1d: kernel channels " + std::to_string(kernels.dim(1)) +
                         " != input channels " + std::to_string(c_in));
  }
  if (kw > L + 2 * padding) {
    throw DimensionError("conv1d: kernel width " + std::to_string(kw) +
                         " exceeds padded length " + std::to_string(L + 2 * padding));
  }
  std::size_t l_out = (L + 2 * padding - kw) / stride + 1;
  std::vector<double> out(c_out * l_out, 0.0);
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t t = 0; t < l_out; ++t) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* xr = x.data().data() + ci * L;
        const double* kr = kernels.data().data() + (co * c_in + ci) * kw;
        for (std::size_t j = 0; j < kw; ++j) {
          std::ptrdiff_t u = static_cast<std::ptrdiff_t>(t * stride + j) -
                             static_cast<std::ptrdiff_t>(padding);
          if (u >= 0 && u < static_cast<std::ptrdiff_t>(L)) acc += xr[u] * kr[j];
        }
      }
      out[co * l_out + t] = acc;
    }
  }
  bool rg = want_grad(tape, {&x, &kernels});
  Tensor y = make_output({c_out, l_out}, std::move(out), rg, "conv1d");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), kp = kernels.ptr(), yp = y.ptr(), c_in, L, c_out, kw,
                           l_out, stride, padding](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < l_out; ++t) {
          double gv = g[co * l_out + t];
          if (gv == 0.0) continue;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t j = 0; j < kw; ++j) {
              std::ptrdiff_t u = static_cast<std::ptrdiff_t>(t * stride + j) -
                                 static_cast<std::ptrdiff_t>(padding);
              if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
              if (kp->requires_grad) {
                f.at(kp)[(co * c_in + ci) * kw + j] += gv * xp->data[ci * L + u];
              }
              if (xp->requires_grad) {
                f.at(xp)[ci * L + u] += gv * kp->data[(co * c_in + ci) * kw + j];
              }
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor global_avg_pool(Tape* tape, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("global_avg_pool: expected [c x L], got " + shape_str(x.shape()));
  std::size_t c = x.dim(0), L = x.dim(1);
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < L; ++j) out[i] += x.data()[i * L + j];
    out[i] /= static_cast<double>(L);
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output({c}, std::move(out), rg, "global_avg_pool");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), c, L](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < L; ++j) gx[i * L + j] += g[i] / static_cast<double>(L);
      }
    });
  }
  return y;
}

Tensor dropout(Tape* tape, const Tensor& x, double p, bool training, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ParameterError("dropout: p must be in [0, 1)");
  if (!training) return x;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = dist(rng) >= p ? keep_scale : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  bool rg = want_grad(tape, {&x});
  Tensor y = make_output(x.shape(), std::move(out), rg, "dropout");
  if (rg) {
    tape->record(y.ptr(), [xp = x.ptr(), yp = y.ptr(), mask = std::move(mask)](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!xp->requires_grad) return;
      auto& gx = f.at(xp);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return y;
}

Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<std::size_t>& targets) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [batch x K]");
  std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (targets.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for batch " +
                         std::to_string(batch));
  }
  for (std::size_t t : targets) {
    if (t >= k) throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.data().data() + b * k;
    double mx = *std::max_element(row, row + k);
    double lse = 0.0;
    for (std::size_t j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
    total += mx + std::log(lse) - row[targets[b]];
  }
  bool rg = want_grad(tape, {&logits});
  Tensor y = make_output({1}, {total / static_cast<double>(batch)}, rg, "cross_entropy");
  if (rg) {
    tape->record(y.ptr(), [lp = logits.ptr(), yp = y.ptr(), targets, batch, k](GradFlow& f) {
      const auto& g = *f.find(yp.get());
      if (!lp->requires_grad) return;
      auto& gl = f.at(lp);
      double gv = g[0] / static_cast<double>(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* row = lp->data.data() + b * k;
        double mx = *std::max_element(row, row + k);
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < k; ++j) {
          double p = std::exp(row[j] - mx) / lse;
          gl[b * k + j] += gv * (p - (j == targets[b] ? 1.0 : 0.0));
        }
      }
    });
  }
  return y;
}

}  // namespace fusereader

#pragma once

#include <doctest.h>

#include <functional>
#include <vector>

#include "fusereader/ops.hpp"
#include "fusereader/tape.hpp"
#include "fusereader/tensor.hpp"

namespace fusereader::testing {

// Central finite differences against the tape gradients. `forward` must
// rebuild the whole computation from the current leaf values on the given
// tape and return a scalar loss; it is re-invoked for every probe, which
// keeps the oracle independent of any recorded state. Large leaves are
// probed on an even stride capped at `max_probes_per_leaf`.
inline void check_gradients(std::vector<Tensor> leaves,
                            const std::function<Tensor(Tape&)>& forward, double h = 1e-5,
                            double tol = 1e-4, std::size_t max_probes_per_leaf = 64) {
  for (Tensor& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.clear_grad();
  }

  Tape tape;
  Tensor loss = forward(tape);
  REQUIRE(loss.is_scalar());
  tape.backward(loss);

  auto eval = [&]() {
    Tape scratch;
    return forward(scratch).item();
  };

  for (Tensor& leaf : leaves) {
    REQUIRE(leaf.has_grad());
    auto grad = leaf.grad();
    std::size_t stride = std::max<std::size_t>(1, leaf.size() / max_probes_per_leaf);
    for (std::size_t i = 0; i < leaf.size(); i += stride) {
      double saved = leaf.mutable_data()[i];
      leaf.mutable_data()[i] = saved + h;
      double up = eval();
      leaf.mutable_data()[i] = saved - h;
      double down = eval();
      leaf.mutable_data()[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double err = std::abs(grad[i] - fd) / std::max({1e-3, std::abs(grad[i]), std::abs(fd)});
      INFO("element ", i, " analytic=", grad[i], " fd=", fd);
      CHECK(err < tol);
    }
  }
}

}  // namespace fusereader::testing

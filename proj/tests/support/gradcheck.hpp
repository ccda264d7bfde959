#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "riskloss/ops.hpp"
#include "support/oracles.hpp"

namespace riskloss::testing {

using OpBuilder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline ad::Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Contracts the op output with fixed random weights so every output element
// contributes a distinct coefficient to the scalar being differentiated.
inline double projected(const OpBuilder& op, const std::vector<ad::Tensor>& inputs,
                        const ad::Tensor& weights, std::vector<ad::Tensor>* grads) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const ad::Var out = op(tape, vars);
  const ad::Var root = ad::sum(ad::mul(out, tape.constant(weights)));
  if (grads != nullptr) {
    tape.backward(root);
    grads->clear();
    for (const auto& v : vars) grads->push_back(tape.grad(v));
  }
  return root.value().item();
}

// Worst relative error between backward() and central differences over all
// inputs of `op`.
inline double op_gradient_error(const OpBuilder& op, std::vector<ad::Tensor> inputs,
                                std::mt19937_64& rng, double h = 1e-5, double floor = 1e-6) {
  ad::Tape probe;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(probe.leaf(t));
  const ad::Tensor weights = random_tensor(rng, op(probe, vars).value().shape(), 0.5, 1.5);

  std::vector<ad::Tensor> analytic;
  projected(op, inputs, weights, &analytic);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      const double up = projected(op, inputs, weights, nullptr);
      inputs[k][i] = saved - h;
      const double down = projected(op, inputs, weights, nullptr);
      inputs[k][i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2 * h), floor));
    }
  }
  return worst;
}

}  // namespace riskloss::testing

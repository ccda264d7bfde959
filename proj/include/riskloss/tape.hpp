#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "riskloss/tensor.hpp"

namespace riskloss::ad {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Inputs handed to a backward rule. in_grad[i] is null when parent i does
// not require a gradient.
struct GradContext {
  const Tensor& out;
  const Tensor& out_grad;
  std::vector<const Tensor*> in;
  std::vector<Tensor*> in_grad;
};

using BackwardFn = std::function<void(GradContext&)>;

// Append-only record of a computation. Nodes are stored in creation order,
// which is a topological order because parents must already exist.
// Single-threaded; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient accumulates across backward() calls.
  Var leaf(Tensor value);
  // Leaf that never receives a gradient.
  Var constant(Tensor value);

  // Records an op output. Throws "numerical overflow" on non-finite values.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const;
  // Gradient buffer (zeros if nothing flowed into v).
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const;

  // Seeds d root / d root = 1 and propagates in reverse creation order.
  // Interior gradients are recomputed each call; leaf gradients accumulate.
  void backward(Var root);

  // Clears leaf gradients.
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first use
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  void check_owned(Var v) const;
  Tensor& grad_buffer(Node& node);

  std::vector<Node> nodes_;
};

}  // namespace riskloss::ad

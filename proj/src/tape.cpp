#include "riskloss/tape.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskloss::ad {

const Tensor& Var::value() const {
  if (tape_ == nullptr) {
    throw std::logic_error("value() on unbound Var");
  }
  return tape_->value(*this);
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw std::runtime_error("numerical overflow");
  }
  Node node;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    check_owned(p);
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) {
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const Tensor& Tape::grad(Var v) {
  check_owned(v);
  return grad_buffer(nodes_[v.id()]);
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

void Tape::backward(Var root) {
  check_owned(root);
  Node& root_node = nodes_[root.id()];
  if (root_node.value.size() != 1) {
    throw std::invalid_argument("backward() requires a scalar root, got shape " +
                                shape_string(root_node.value.shape()));
  }
  if (!root_node.requires_grad) {
    return;
  }
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& node = nodes_[i];
    if (!node.is_leaf && node.grad.size() > 0) {
      std::fill(node.grad.data().begin(), node.grad.data().end(), 0.0);
    }
  }
  grad_buffer(root_node)[0] += 1.0;

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) {
      continue;
    }
    GradContext ctx{node.value, node.grad, {}, {}};
    ctx.in.reserve(node.parents.size());
    ctx.in_grad.reserve(node.parents.size());
    for (const auto p : node.parents) {
      Node& parent = nodes_[p];
      ctx.in.push_back(&parent.value);
      ctx.in_grad.push_back(parent.requires_grad ? &grad_buffer(parent) : nullptr);
    }
    node.backward(ctx);
  }
}

void Tape::zero_grad() {
  for (auto& node : nodes_) {
    if (node.is_leaf && node.grad.size() > 0) {
      std::fill(node.grad.data().begin(), node.grad.data().end(), 0.0);
    }
  }
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this tape");
  }
}

Tensor& Tape::grad_buffer(Node& node) {
  if (node.grad.size() == 0) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

}  // namespace riskloss::ad

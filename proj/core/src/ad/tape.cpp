#include "stmom/ad/tape.hpp"

#include <stdexcept>

#include "stmom/error.hpp"

namespace stmom::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 Backward backward) {
  return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> parents,
                 Backward backward) {
  if (!value.all_finite()) {
    throw NumericalError("non-finite value produced by op '" + std::string(op) + "'");
  }
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw std::invalid_argument("op mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw std::invalid_argument("backward root belongs to another tape");
  if (nodes_[root.id_].value.size() != 1) {
    throw std::invalid_argument("backward root must be a scalar");
  }
  grad(root.id_)[0] = 1.0;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.size() != n.grad.size()) n.param->zero_grad();
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace stmom::ad

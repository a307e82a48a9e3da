#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

#include "stmom/ad/tensor.hpp"

namespace stmom::ad {

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Every op appends a node; backward() walks the nodes in
/// reverse order and accumulates gradients into parameters bound with
/// parameter().
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (see grad()).
  Var variable(Tensor value);
  /// Leaf whose gradient is added to p.grad by backward().
  Var parameter(Parameter& p);

  /// Appends an op result. Throws NumericalError naming `op` if the value
  /// contains NaN or infinity.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             Backward backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> parents, Backward backward);

  /// Seeds d(root)/d(root) = 1 and propagates. root must hold one element.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient buffer of a node, allocated (zeroed) on first access.
  Tensor& grad(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

}  // namespace stmom::ad

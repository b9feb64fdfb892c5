#include "densecap/nn/tape.hpp"

#include "densecap/error.hpp"

namespace densecap::nn {

Tape& Var::tape() const {
  if (!tape_) throw ContractViolation("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording();
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.param = &p;
  n.requires_grad = recording();
  Var v = push(std::move(n));
  param_ids_.emplace(&p, v.id());
  return v;
}

const Tensor& Tape::value(Var v) const {
  if (v.tape_ != this) throw ContractViolation("Var belongs to a different tape");
  return value(v.id_);
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor(value(v.id()).shape());
  return n.grad;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

Var Tape::emit(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (const Var& p : parents) {
      if (nodes_[p.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

Var Tape::emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (const Var& p : parents) {
      if (nodes_[p.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (!recording()) throw ContractViolation("backward() on an inference tape");
  if (consumed_) throw ContractViolation("backward() called twice on one tape");
  if (loss.tape_ != this) throw ContractViolation("loss belongs to a different tape");
  if (value(loss.id()).size() != 1) {
    throw ContractViolation("backward() requires a scalar loss, got shape " +
                            shape_string(value(loss.id()).shape()));
  }
  consumed_ = true;
  grad_buffer(loss.id())[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param && !n.grad.empty()) {
      n.param->grad += n.grad;
      n.param->has_grad = true;
    }
  }
}

}  // namespace densecap::nn

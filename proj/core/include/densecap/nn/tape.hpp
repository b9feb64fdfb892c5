#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "densecap/nn/param_store.hpp"
#include "densecap/nn/tensor.hpp"

namespace densecap::nn {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  int id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Scalar item() const { return value().item(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Dynamic reverse-mode tape. Each forward pass records onto a fresh tape;
// backward() consumes it and adds parameter gradients into their
// Parameter::grad buffers (additively; callers zero grads between steps).
class Tape {
 public:
  enum class Mode { kRecord, kInference };
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::kRecord; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  // Differentiable leaf that is not a parameter (gradient checks, probes).
  Var input(Tensor value);
  // Leaf bound to a parameter; one node per parameter per tape.
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  const Tensor& value(int id) const;
  // Gradient of the last backward pass wrt `v`; zeros if unreached.
  Tensor grad(Var v) const;

  void backward(Var loss);

  // --- op authoring ---
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Records a result node. The closure is dropped when no parent requires a
  // gradient or the tape is in inference mode.
  Var emit(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn);
  const Tensor& grad_of(int id) const { return nodes_[id].grad; }
  // Zero-initialised on first access during backward.
  Tensor& grad_buffer(int id);

 private:
  struct Node {
    Tensor value;
    Parameter* param = nullptr;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  Mode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
};

}  // namespace densecap::nn

#include "densecap/nn/param_store.hpp"

#include <cmath>
#include <cstring>

#include "densecap/error.hpp"
#include "densecap/rng.hpp"

namespace densecap::nn {

Parameter& ParamStore::add(const std::string& name, Tensor init) {
  if (entries_.contains(name)) {
    throw ContractViolation("duplicate parameter name: " + name);
  }
  Parameter p;
  p.grad = Tensor(init.shape());
  p.value = std::move(init);
  return entries_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::add_uniform(const std::string& name, Shape shape, Rng& rng,
                                   Scalar range) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-range, range);
  return add(name, std::move(t));
}

Parameter& ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape)));
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.contains(name);
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : entries_) p.grad.fill(0.0);
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : entries_) n += p.value.size();
  return n;
}

void ParamStore::load_values(const ParamStore& other) {
  for (auto& [name, p] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end()) {
      throw ParseError("checkpoint is missing parameter " + name);
    }
    if (it->second.value.shape() != p.value.shape()) {
      throw ShapeError("parameter " + name + " has shape " +
                       shape_string(it->second.value.shape()) + ", expected " +
                       shape_string(p.value.shape()));
    }
    p.value = it->second.value;
  }
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.value.shape() != b->second.value.shape()) return false;
    const auto x = a->second.value.data();
    const auto y = b->second.value.data();
    if (std::memcmp(x.data(), y.data(), x.size_bytes()) != 0) return false;
  }
  return true;
}

Scalar global_grad_norm(const ParamStore& store) {
  Scalar sq = 0.0;
  for (const auto& [_, p] : store) {
    for (auto g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

Scalar clip_grad_norm(ParamStore& store, Scalar max_norm) {
  const Scalar norm = global_grad_norm(store);
  if (norm > max_norm && norm > 0.0) {
    const Scalar k = max_norm / norm;
    for (auto& [_, p] : store) {
      for (auto& g : p.grad.data()) g *= k;
    }
  }
  return norm;
}

}  // namespace densecap::nn

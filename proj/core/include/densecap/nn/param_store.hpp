#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>

#include "densecap/nn/tensor.hpp"

namespace densecap {
class Rng;
}

namespace densecap::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
  // Set once any backward pass has flushed a gradient into this parameter.
  bool has_grad = false;
};

// Named parameter tensors. Iteration is lexicographic by name and entry
// addresses are stable for the lifetime of the store.
class ParamStore {
 public:
  using Map = std::map<std::string, Parameter>;

  ParamStore() = default;
  ParamStore(const ParamStore&) = default;
  ParamStore& operator=(const ParamStore&) = default;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& add(const std::string& name, Tensor init);
  Parameter& add_uniform(const std::string& name, Shape shape, Rng& rng,
                         Scalar range);
  Parameter& add_zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  void zero_grad();
  std::size_t num_scalars() const;
  std::size_t size() const { return entries_.size(); }

  // Copies values from `other` for every shared name; shapes must agree and
  // every entry of this store must be present in `other`.
  void load_values(const ParamStore& other);

  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  // Bitwise comparison of names, shapes and values.
  bool same_values(const ParamStore& other) const;

 private:
  Map entries_;
};

Scalar global_grad_norm(const ParamStore& store);
// Rescales all grads so the global norm is at most `max_norm`; returns the
// norm before clipping.
Scalar clip_grad_norm(ParamStore& store, Scalar max_norm);

}  // namespace densecap::nn

#include "densecap/nn/adam.hpp"

#include <cmath>

#include "densecap/error.hpp"

namespace densecap::nn {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                 const AdamConfig& c, std::int64_t t) {
  if (grad.shape() != param.shape() || m.shape() != param.shape() ||
      v.shape() != param.shape()) {
    throw ShapeError("adam_update: shape mismatch");
  }
  const Scalar bc1 = 1.0 - std::pow(c.beta1, static_cast<Scalar>(t));
  const Scalar bc2 = 1.0 - std::pow(c.beta2, static_cast<Scalar>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Scalar g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const Scalar mhat = m[i] / bc1;
    const Scalar vhat = v[i] / bc2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

StepStatus Adam::step(ParamStore& store) {
  bool any = false;
  for (const auto& [_, p] : store) any = any || p.has_grad;
  if (!any) return StepStatus::kNoGradients;
  ++t_;
  for (auto& [name, p] : store) {
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.m = Tensor(p.value.shape());
      it->second.v = Tensor(p.value.shape());
    }
    adam_update(p.value, p.grad, it->second.m, it->second.v, config_, t_);
  }
  return StepStatus::kApplied;
}

}  // namespace densecap::nn

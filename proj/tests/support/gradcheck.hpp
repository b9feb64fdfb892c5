#pragma once

#include <functional>
#include <string>

#include "densecap/nn/param_store.hpp"
#include "densecap/nn/tape.hpp"

namespace testing_support {

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;  // "<param>[<index>]"
  std::size_t checked = 0;
};

// Compares backward() against central differences on every scalar of every
// parameter in `store`. rel = |a - n| / max(|a|, |n|, floor).
GradCheck check_param_grads(densecap::nn::ParamStore& store,
                            const std::function<densecap::nn::Var(densecap::nn::Tape&)>& loss, double eps = 1e-5,
                            double floor = 1e-4);

// Same check against a differentiable input tensor created with Tape::input.
GradCheck check_input_grad(densecap::nn::Tensor x,
                           const std::function<densecap::nn::Var(densecap::nn::Tape&, densecap::nn::Var)>& loss,
                           double eps = 1e-5, double floor = 1e-4);

}  // namespace testing_support

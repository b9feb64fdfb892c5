#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "densecap/nn/param_store.hpp"

namespace densecap::nn {

struct AdamConfig {
  Scalar lr = 5e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

enum class StepStatus { kApplied, kNoGradients };

// Bias-corrected Adam. Moment buffers are keyed by parameter name and live
// in the optimizer, so one optimizer serves exactly one ParamStore.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Returns kNoGradients (and leaves parameters untouched) if no backward
  // pass ever reached the store.
  StepStatus step(ParamStore& store);

  std::int64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(Scalar lr) { config_.lr = lr; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// Single update with an explicit step index `t` (1-based). Moments are
// updated in place.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                 const AdamConfig& config, std::int64_t t);

}  // namespace densecap::nn

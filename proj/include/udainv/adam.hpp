#pragma once

#include <cstdint>
#include <vector>

#include "udainv/tensor.hpp"

namespace udainv {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments per parameter tensor plus the shared step counter.
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState for_params(const std::vector<Tensor>& params, AdamHyper hyper);
};

// Standard bias-corrected Adam descent step; params and state updated in place.
// Gradient ascent is a descent step on negated gradients (see adam_ascend).
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);
void adam_ascend(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace udainv

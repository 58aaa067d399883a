#include "udainv/adam.hpp"

#include <cmath>
#include <string>

#include "udainv/error.hpp"

namespace udainv {

AdamState AdamState::for_params(const std::vector<Tensor>& params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.shape(), 0.0);
    s.v.emplace_back(p.shape(), 0.0);
  }
  return s;
}

namespace {

void check_shapes(const std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                  const AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw ShapeError("adam_step: parameter/gradient/state counts differ (" +
                     std::to_string(params.size()) + ", " + std::to_string(grads.size()) + ", " +
                     std::to_string(state.m.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != state.m[i].shape() ||
        params[i].shape() != state.v[i].shape())
      throw ShapeError("adam_step: tensor " + std::to_string(i) + " shape " +
                       shape_string(params[i].shape()) + " vs gradient " +
                       shape_string(grads[i].shape()));
  }
}

void update(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
            double sign) {
  check_shapes(params, grads, state);
  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = sign * g[j];
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

}  // namespace

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  update(params, grads, state, 1.0);
}

void adam_ascend(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  update(params, grads, state, -1.0);
}

}  // namespace udainv

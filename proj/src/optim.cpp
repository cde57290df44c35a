#include "nerv/optim.hpp"

#include <cmath>

namespace nerv {

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state, double lr,
               const AdamHyper& hyper) {
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(hyper.beta1), b2 = static_cast<float>(hyper.beta2);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const float eps = static_cast<float>(hyper.eps);
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name).data;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.size()) m.assign(p.size(), 0.0f);
    if (v.size() != p.size()) v.assign(p.size(), 0.0f);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float gi = g.data[i];
      m[i] = b1 * m[i] + (1 - b1) * gi;
      v[i] = b2 * v[i] + (1 - b2) * gi * gi;
      p[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

}  // namespace nerv

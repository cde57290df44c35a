#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nerv/tensor.hpp"

namespace nerv {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

/// One bias-corrected Adam update of every parameter that has a gradient.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

}  // namespace nerv

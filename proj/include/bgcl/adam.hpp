#pragma once

#include <map>
#include <string>

#include "bgcl/types.hpp"

namespace bgcl {

using ParamSet = std::map<std::string, Matrix>;

struct AdamState {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  long step = 0;
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
};

// Standard Adam with bias correction. Missing gradients are treated as zero;
// moment tensors are created on first use, shaped like their parameter.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

}  // namespace bgcl

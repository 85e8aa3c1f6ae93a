#pragma once

#include <vector>

#include "nto/networks.hpp"

namespace nto {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step = 0;
  NetworkGrads m;
  NetworkGrads v;
};

AdamState make_adam(const NetworkParams& params);

/// Bias-corrected Adam update in place. Throws NumericalError on non-finite gradients.
void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state, double lr);

}  // namespace nto

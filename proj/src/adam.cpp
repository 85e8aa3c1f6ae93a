#include "nto/adam.hpp"

#include <cmath>
#include <string>

#include "nto/error.hpp"

namespace nto {

AdamState make_adam(const NetworkParams& params) {
  AdamState s;
  s.m = zero_grads(params);
  s.v = zero_grads(params);
  return s;
}

namespace {

template <typename P, typename G>
void update(P& p, const G& g, P& m, P& v, double b1, double b2, double c1, double c2, double lr, double eps) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state, double lr) {
  if (grads.size() != params.layers.size()) throw ContractViolation("adam: gradient count does not match layers");
  if (state.m.size() != params.layers.size()) state = make_adam(params);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite()) {
      throw NumericalError("adam: non-finite gradient in layer " + std::to_string(l) + " at step " +
                           std::to_string(state.step + 1));
    }
    if (grads[l].weight.rows() != params.layers[l].weight.rows() ||
        grads[l].weight.cols() != params.layers[l].weight.cols() ||
        grads[l].bias.size() != params.layers[l].bias.size()) {
      throw ContractViolation("adam: gradient shape mismatch in layer " + std::to_string(l));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < grads.size(); ++l) {
    update(params.layers[l].weight, grads[l].weight, state.m[l].weight, state.v[l].weight, state.beta1, state.beta2, c1,
           c2, lr, state.epsilon);
    update(params.layers[l].bias, grads[l].bias, state.m[l].bias, state.v[l].bias, state.beta1, state.beta2, c1, c2,
           lr, state.epsilon);
  }
}

}  // namespace nto

#include "neurofuzzy/optimizer.hpp"

#include "neurofuzzy/errors.hpp"

#include <cmath>
#include <string>

namespace nf {

AdamState AdamState::for_params(std::span<const NamedTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(Array::Zero(p.tensor.numel()));
    s.v.push_back(Array::Zero(p.tensor.numel()));
  }
  return s;
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr, long batch_index) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam: state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i].tensor;
    if (state.m[i].size() != p.numel()) throw ConfigError("adam: moment shape mismatch for " + params[i].name);
    if (p.has_grad() && !p.grad().allFinite()) {
      throw DivergenceError("non-finite gradient in " + params[i].name + " at batch " +
                            std::to_string(batch_index));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    Array& m = state.m[i];
    Array& v = state.v[i];
    if (p.has_grad()) {
      const Array& g = p.grad();
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    } else {
      m *= state.beta1;
      v *= state.beta2;
    }
    p.value() -= lr * (m / correction1) / ((v / correction2).sqrt() + state.eps);
  }
}

}  // namespace nf

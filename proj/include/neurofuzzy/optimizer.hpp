#pragma once

#include "neurofuzzy/grad_check.hpp"
#include "neurofuzzy/tensor.hpp"

#include <span>
#include <vector>

namespace nf {

/// Adam moments for a fixed, ordered parameter list.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Array> m;
  std::vector<Array> v;

  static AdamState for_params(std::span<const NamedTensor> params);
};

/// One bias-corrected Adam update using the gradients stored on `params`.
/// Parameters without a gradient are treated as having a zero gradient.
/// Throws DivergenceError on a non-finite gradient, naming the parameter and
/// `batch_index`.
void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr, long batch_index = -1);

}  // namespace nf

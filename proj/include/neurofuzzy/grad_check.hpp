#pragma once

#include "neurofuzzy/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double perturbation = 1e-5;
  /// Coordinates sampled per parameter; groups with fewer are checked exhaustively.
  Index samples_per_param = 50;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator. Central differences in
  /// double precision carry roughly 1e-11 of rounding noise at h = 1e-5, so
  /// gradients below this magnitude are effectively compared in absolute terms.
  double denominator_floor = 1e-6;
};

struct ParamGradError {
  std::string name;
  Index coords_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;

  double max_rel_error() const;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-12);

/// Compares reverse-mode gradients of `loss_fn` with central differences.
///
/// `loss_fn` must rebuild the graph from the current parameter values on every
/// call and return a scalar. Parameters are restored after each probe.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace nf

#pragma once

#include "neurofuzzy/grad_check.hpp"
#include "neurofuzzy/network_spec.hpp"

#include <cstdint>
#include <random>

namespace nf {

struct OracleReport {
  int fio_trials = 0;
  int fpo_trials = 0;
  double fio_max_abs_diff = 0.0;
  double fpo_max_abs_diff = 0.0;
  double seconds = 0.0;

  double max_abs_diff() const { return fio_max_abs_diff > fpo_max_abs_diff ? fio_max_abs_diff : fpo_max_abs_diff; }
};

/// Bounds of the random layer instances used by the oracle comparison.
struct OracleTrialLimits {
  Index max_size = 8;      // H, W
  Index max_channels = 2;  // C
  Index max_rules = 4;     // K
  Index max_outputs = 4;   // n
  Index max_kernel = 3;    // s
  Index max_stride = 3;    // r (pooling only)
};

/// Random fuzzy layer with parameters spread so that memberships hit both
/// clip boundaries and the interior, and with non-zero biases.
FuzzyLayerParams random_fuzzy_params(LayerKind kind, Index rules, Index outputs, Index channels, Index kernel,
                                     Index stride, std::mt19937_64& rng);

/// Runs `trials` random FIO and `trials` random FPO instances through the
/// fused layers and the loop-based reference, recording the largest
/// absolute difference.
OracleReport run_oracle_trials(int trials, std::uint64_t seed, const OracleTrialLimits& limits = {});

struct NetworkGradCheckOptions {
  Index batch = 2;
  GradCheckOptions check;
};

/// Builds `spec` (which must carry an input directive), draws a random batch
/// and labels, and grad-checks the cross-entropy loss w.r.t. every parameter.
GradCheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed,
                                  const NetworkGradCheckOptions& options = {});

}  // namespace nf

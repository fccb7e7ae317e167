#pragma once

#include "neurofuzzy/grad_check.hpp"
#include "neurofuzzy/tensor.hpp"

#include <random>
#include <string_view>
#include <vector>

namespace nf {

enum class LayerKind {
  FIO,  ///< fuzzy inference operation, size preserving
  FPO,  ///< fuzzy pooling operation, strided
  FL    ///< fully connected
};

std::string_view to_string(LayerKind kind);

/// Slope of every Leaky-ReLU inside the fuzzy layers.
inline constexpr double kFuzzyLeakySlope = 0.01;
/// Additive guard in the firing-strength denominator.
inline constexpr double kFiringEpsilon = 1e-8;

/// Learnable parameters of one FIO or FPO layer.
///
/// rule_filters [K,C,s,s] are the fuzzy sets (one pattern per rule, no bias).
/// mix_filters [n,K,1,1] + mix_bias [n] are the 1x1 filters that combine the
/// firing strengths of all rules into n maps. out_filters [n,C,s,s] +
/// out_bias [n] realize the rule consequents.
struct FuzzyLayerParams {
  LayerKind kind = LayerKind::FIO;
  Index rules = 1;
  Index outputs = 1;
  Index channels = 1;
  Index kernel = 1;
  Index stride = 1;

  Tensor rule_filters;
  Tensor mix_filters;
  Tensor mix_bias;
  Tensor out_filters;
  Tensor out_bias;

  /// Throws ConfigError if sizes or tensor shapes are inconsistent.
  void validate() const;
  std::vector<NamedTensor> named_parameters(const std::string& prefix = {}) const;
};

/// Random initialization. Rule filters ~ U[0, 2/(C s^2)]; mix and output
/// filters ~ Glorot-uniform; biases zero. FIO layers get stride 1.
FuzzyLayerParams init_params(LayerKind kind, Index rules, Index outputs, Index channels, Index kernel,
                             Index stride, std::mt19937_64& rng);

/// Clipped dot products of every (strided) subregion with every rule pattern.
Tensor membership_matrix(const Tensor& input, const FuzzyLayerParams& params);

/// Per-cell normalization of memberships across rules.
Tensor firing_strength(const Tensor& memberships);

/// The g(.) stage: 1x1 rule mixing with Leaky-ReLU. For FIO the firing map
/// is first zero padded by s-1 and the mixed map is average pooled (window s,
/// stride 1) back to the input size.
Tensor g_map(const Tensor& firing, const FuzzyLayerParams& params);

/// The f(x) stage: consequent convolution + bias + Leaky-ReLU. FIO pads
/// "same" (s-1 total, floor leading); FPO uses the layer stride, no padding.
Tensor f_map(const Tensor& input, const FuzzyLayerParams& params);

/// Intermediate maps of one forward pass.
struct FuzzyTrace {
  Tensor membership;  // [N,K,h,w]
  Tensor firing;      // [N,K,h,w]
  Tensor padded;      // FIO only: [N,K,h+2(s-1),w+2(s-1)]
  Tensor g;           // [N,n,h',w']
  Tensor f;           // [N,n,h',w']
  Tensor output;      // [N,n,h',w']
};

/// Runs the layer with rules in their listed order, keeping every stage.
FuzzyTrace fuzzy_forward_traced(const Tensor& input, const FuzzyLayerParams& params);

/// Fuzzy inference operation: g_map(firing) * f_map(input), spatial size kept.
/// The fused forward passes evaluate rules in a canonical order derived from
/// their parameter values, so relisting the rules (with the matching mixing
/// columns) reproduces the output bit for bit.
Tensor fio_forward(const Tensor& input, const FuzzyLayerParams& params);
/// Fuzzy pooling operation: output size floor((H - s)/r) + 1.
Tensor fpo_forward(const Tensor& input, const FuzzyLayerParams& params);
/// Dispatches on params.kind.
Tensor fuzzy_forward(const Tensor& input, const FuzzyLayerParams& params);

/// Output spatial size of a fuzzy layer on an input of size `in`.
Index fuzzy_output_size(LayerKind kind, Index in, Index kernel, Index stride);

}  // namespace nf

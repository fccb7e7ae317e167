#pragma once

// Literal loop-based evaluators of TSK inference and of the fuzzy layers.
// Nothing here calls into ops.hpp or fuzzy_layers.cpp: these are the oracles
// the fused implementations are checked against.

#include "neurofuzzy/fuzzy_layers.hpp"

#include <span>
#include <utility>
#include <vector>

namespace nf::reference {

/// Gaussian membership exp(-(x - center)^2 / (2 width^2)).
struct GaussianMembership {
  double center = 0.0;
  double width = 1.0;

  double operator()(double x) const;
};

/// IF x_1 is A_1k AND ... AND x_d is A_dk THEN y_k = intercept + coeffs . x
struct TskRule {
  std::vector<GaussianMembership> premises;
  std::vector<double> coeffs;
  double intercept = 0.0;

  double strength(std::span<const double> x) const;  ///< product t-norm
  double consequent(std::span<const double> x) const;
};

struct TskRuleSet {
  std::vector<TskRule> rules;

  /// Throws ConfigError on empty rule sets, dimension mismatch, or width <= 0.
  void validate(std::size_t input_dim) const;
};

/// sum_k p_k f_k / sum_k p_k. Throws DataError when every p_k is zero.
double tsk_combine(std::span<const double> strengths, std::span<const double> outputs);

/// Weighted-average TSK output for input x.
double tsk_eval(const TskRuleSet& rules, std::span<const double> x);

/// Single image, C x H x W, row-major.
struct Image {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  std::vector<double> data;

  double at(Index c, Index y, Index x) const { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
  double& at(Index c, Index y, Index x) { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }

  /// Sample `n` of an N x C x H x W tensor.
  static Image from_tensor(const Tensor& batch, Index n = 0);
};

/// Plain-vector copy of a fuzzy layer's parameters plus the explicit list of
/// subregion top-left corners visited at the layer stride.
struct NaiveFuzzyLayerSpec {
  LayerKind kind = LayerKind::FIO;
  Index rules = 0, outputs = 0, channels = 0, kernel = 0, stride = 1;
  std::vector<double> rule_filters;  // [K][C][s][s]
  std::vector<double> mix_filters;   // [n][K]
  std::vector<double> mix_bias;      // [n]
  std::vector<double> out_filters;   // [n][C][s][s]
  std::vector<double> out_bias;      // [n]

  Index rows = 0, cols = 0;                        // subregion grid
  std::vector<std::pair<Index, Index>> subregions;  // row-major over the grid

  static NaiveFuzzyLayerSpec from_params(const FuzzyLayerParams& params, Index height, Index width);
};

/// Per-rule membership grades [K][rows][cols] after clipping.
std::vector<double> membership_grades(const Image& image, const NaiveFuzzyLayerSpec& spec);
/// Membership grades normalized across rules per cell.
std::vector<double> firing_strengths(const Image& image, const NaiveFuzzyLayerSpec& spec);

/// Fuzzy inference operation, n x H x W.
Image fio_reference(const Image& image, const NaiveFuzzyLayerSpec& spec);
/// Fuzzy pooling operation, n x rows x cols.
Image fpo_reference(const Image& image, const NaiveFuzzyLayerSpec& spec);

}  // namespace nf::reference

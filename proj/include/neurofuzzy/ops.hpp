#pragma once

#include "neurofuzzy/tensor.hpp"

#include <optional>
#include <random>
#include <span>
#include <vector>

namespace nf {

/// Zero padding applied to the four spatial sides of an N x C x H x W tensor.
struct Padding2d {
  Index top = 0;
  Index left = 0;
  Index bottom = 0;
  Index right = 0;

  static constexpr Padding2d uniform(Index p) { return {p, p, p, p}; }
  /// Total padding `total` split floor on the leading side, ceil on the trailing side.
  static constexpr Padding2d same(Index total) {
    return {total / 2, total / 2, total - total / 2, total - total / 2};
  }
};

/// Spatial output size of a sliding window.
constexpr Index conv_output_size(Index in, Index kernel, Index stride, Index pad_total) {
  return (in + pad_total - kernel) / stride + 1;
}

/// 2-d cross-correlation. input [N,C,H,W], filters [K,C,kh,kw], bias [K].
Tensor conv2d(const Tensor& input, const Tensor& filters, Index stride, Padding2d padding,
              const std::optional<Tensor>& bias = std::nullopt);
inline Tensor conv2d(const Tensor& input, const Tensor& filters, Index stride = 1, Index padding = 0,
                     const std::optional<Tensor>& bias = std::nullopt) {
  return conv2d(input, filters, stride, Padding2d::uniform(padding), bias);
}

/// min(max(x, 0), 1); gradient 1 strictly inside (0, 1), else 0.
Tensor clamp01(const Tensor& input);

/// Divides each cell by the sum over axis 1 (rules) plus epsilon.
Tensor normalize_rules(const Tensor& memberships, double epsilon = 1e-8);

Tensor pad2d(const Tensor& input, Padding2d padding);
inline Tensor pad2d(const Tensor& input, Index pad) { return pad2d(input, Padding2d::uniform(pad)); }

/// Mean over window x window blocks with a fixed window^2 divisor.
Tensor avg_pool2d(const Tensor& input, Index window, Index stride);

enum class EltwiseMode { Mul, Add };
Tensor eltwise(const Tensor& a, const Tensor& b, EltwiseMode mode);
inline Tensor mul(const Tensor& a, const Tensor& b) { return eltwise(a, b, EltwiseMode::Mul); }
inline Tensor add(const Tensor& a, const Tensor& b) { return eltwise(a, b, EltwiseMode::Add); }

/// Gradient at exactly 0 is taken as 1.
Tensor leaky_relu(const Tensor& input, double slope = 0.01);
Tensor relu(const Tensor& input);

/// input [N,D] x weights [D,U] + bias [U].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& input, double rate, bool training, std::mt19937_64& rng);

/// Reorders slices along `axis`: out[.., i, ..] = input[.., order[i], ..].
Tensor permute_axis(const Tensor& input, std::size_t axis, const std::vector<Index>& order);

Tensor sum(const Tensor& input);
/// Collapses everything after the batch axis.
Tensor flatten(const Tensor& input);

}  // namespace nf

#include "neurofuzzy/fuzzy_layers.hpp"

#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/ops.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <numeric>

namespace nf {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FIO: return "fio";
    case LayerKind::FPO: return "fpo";
    case LayerKind::FL: return "fl";
  }
  return "?";
}

namespace {

Tensor uniform_tensor(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape), 0.0, true);
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

void expect_shape(const Tensor& t, const Shape& shape, const char* name) {
  if (!t.defined() || t.shape() != shape) {
    throw ConfigError(std::string("fuzzy layer: ") + name + " must have shape " + to_string(shape) +
                      (t.defined() ? ", got " + to_string(t.shape()) : ""));
  }
}

void check_input(const Tensor& input, const FuzzyLayerParams& p) {
  if (input.rank() != 4) throw ConfigError("fuzzy layer input must be N x C x H x W");
  if (input.dim(1) != p.channels) {
    throw ConfigError("fuzzy layer expects " + std::to_string(p.channels) + " channels, got " +
                      std::to_string(input.dim(1)));
  }
  if (p.kernel > input.dim(2) || p.kernel > input.dim(3)) {
    throw ConfigError("fuzzy set size " + std::to_string(p.kernel) + " exceeds input " +
                      std::to_string(input.dim(2)) + "x" + std::to_string(input.dim(3)));
  }
}

// IEEE-754 total order as a signed integer key.
std::int64_t order_key(double v) {
  const auto bits = std::bit_cast<std::int64_t>(v);
  return bits < 0 ? bits ^ INT64_MAX : bits;
}

// Rule order fixed by the rules' own values: filter entries first, then the
// rule's column of mixing weights.
std::vector<Index> canonical_rule_order(const FuzzyLayerParams& p) {
  const Index size = p.channels * p.kernel * p.kernel;
  const Array& filters = p.rule_filters.value();
  const Array& mix = p.mix_filters.value();
  auto key_less = [&](Index a, Index b) {
    for (Index i = 0; i < size; ++i) {
      const auto ka = order_key(filters(a * size + i)), kb = order_key(filters(b * size + i));
      if (ka != kb) return ka < kb;
    }
    for (Index n = 0; n < p.outputs; ++n) {
      const auto ka = order_key(mix(n * p.rules + a)), kb = order_key(mix(n * p.rules + b));
      if (ka != kb) return ka < kb;
    }
    return false;
  };
  std::vector<Index> order(static_cast<std::size_t>(p.rules));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), key_less);
  return order;
}

FuzzyLayerParams with_canonical_rules(const FuzzyLayerParams& p) {
  const std::vector<Index> order = canonical_rule_order(p);
  bool identity = true;
  for (std::size_t i = 0; i < order.size(); ++i) identity = identity && order[i] == static_cast<Index>(i);
  if (identity) return p;
  FuzzyLayerParams q = p;
  q.rule_filters = permute_axis(p.rule_filters, 0, order);
  q.mix_filters = permute_axis(p.mix_filters, 1, order);
  return q;
}

}  // namespace

void FuzzyLayerParams::validate() const {
  if (kind == LayerKind::FL) throw ConfigError("fuzzy layer kind must be fio or fpo");
  if (rules < 1 || outputs < 1 || channels < 1 || kernel < 1 || stride < 1) {
    throw ConfigError("fuzzy layer: rules, outputs, channels, kernel and stride must be >= 1");
  }
  if (kind == LayerKind::FIO && stride != 1) {
    throw ConfigError("fio layers require stride 1; use fpo to reduce size");
  }
  expect_shape(rule_filters, {rules, channels, kernel, kernel}, "rule_filters");
  expect_shape(mix_filters, {outputs, rules, 1, 1}, "mix_filters");
  expect_shape(mix_bias, {outputs}, "mix_bias");
  expect_shape(out_filters, {outputs, channels, kernel, kernel}, "out_filters");
  expect_shape(out_bias, {outputs}, "out_bias");
}

std::vector<NamedTensor> FuzzyLayerParams::named_parameters(const std::string& prefix) const {
  return {{prefix + "rule_filters", rule_filters},
          {prefix + "mix_filters", mix_filters},
          {prefix + "mix_bias", mix_bias},
          {prefix + "out_filters", out_filters},
          {prefix + "out_bias", out_bias}};
}

FuzzyLayerParams init_params(LayerKind kind, Index rules, Index outputs, Index channels, Index kernel,
                             Index stride, std::mt19937_64& rng) {
  FuzzyLayerParams p;
  p.kind = kind;
  p.rules = rules;
  p.outputs = outputs;
  p.channels = channels;
  p.kernel = kernel;
  p.stride = kind == LayerKind::FIO ? 1 : stride;
  if (rules < 1 || outputs < 1 || channels < 1 || kernel < 1 || stride < 1) {
    throw ConfigError("fuzzy layer: rules, outputs, channels, kernel and stride must be >= 1");
  }
  const double area = static_cast<double>(kernel * kernel);
  p.rule_filters = uniform_tensor({rules, channels, kernel, kernel}, 0.0,
                                  2.0 / (static_cast<double>(channels) * area), rng);
  const double mix_bound = std::sqrt(6.0 / static_cast<double>(rules + outputs));
  p.mix_filters = uniform_tensor({outputs, rules, 1, 1}, -mix_bound, mix_bound, rng);
  p.mix_bias = Tensor({outputs}, 0.0, true);
  const double out_bound =
      std::sqrt(6.0 / (static_cast<double>(channels) * area + static_cast<double>(outputs) * area));
  p.out_filters = uniform_tensor({outputs, channels, kernel, kernel}, -out_bound, out_bound, rng);
  p.out_bias = Tensor({outputs}, 0.0, true);
  p.validate();
  return p;
}

Tensor membership_matrix(const Tensor& input, const FuzzyLayerParams& params) {
  check_input(input, params);
  return clamp01(conv2d(input, params.rule_filters, params.stride, 0));
}

Tensor firing_strength(const Tensor& memberships) {
  return normalize_rules(memberships, kFiringEpsilon);
}

namespace {

Tensor mix_rules(const Tensor& firing, const FuzzyLayerParams& params) {
  return leaky_relu(conv2d(firing, params.mix_filters, 1, 0, params.mix_bias), kFuzzyLeakySlope);
}

}  // namespace

Tensor g_map(const Tensor& firing, const FuzzyLayerParams& params) {
  if (firing.rank() != 4 || firing.dim(1) != params.rules) {
    throw ConfigError("g_map: firing map must have " + std::to_string(params.rules) + " rule channels");
  }
  if (params.kind == LayerKind::FPO) return mix_rules(firing, params);
  if (params.stride != 1) throw ConfigError("g_map: fio requires stride 1");
  const Index s = params.kernel;
  return avg_pool2d(mix_rules(pad2d(firing, s - 1), params), s, 1);
}

Tensor f_map(const Tensor& input, const FuzzyLayerParams& params) {
  check_input(input, params);
  if (params.kind == LayerKind::FIO) {
    return leaky_relu(conv2d(input, params.out_filters, 1, Padding2d::same(params.kernel - 1),
                             params.out_bias),
                      kFuzzyLeakySlope);
  }
  return leaky_relu(conv2d(input, params.out_filters, params.stride, 0, params.out_bias),
                    kFuzzyLeakySlope);
}

FuzzyTrace fuzzy_forward_traced(const Tensor& input, const FuzzyLayerParams& params) {
  params.validate();
  FuzzyTrace t;
  t.membership = membership_matrix(input, params);
  t.firing = firing_strength(t.membership);
  if (params.kind == LayerKind::FIO) {
    const Index s = params.kernel;
    t.padded = pad2d(t.firing, s - 1);
    t.g = avg_pool2d(mix_rules(t.padded, params), s, 1);
  } else {
    t.g = mix_rules(t.firing, params);
  }
  t.f = f_map(input, params);
  t.output = mul(t.g, t.f);
  return t;
}

Tensor fio_forward(const Tensor& input, const FuzzyLayerParams& params) {
  if (params.kind != LayerKind::FIO) throw ConfigError("fio_forward called with non-fio parameters");
  params.validate();
  return fuzzy_forward_traced(input, with_canonical_rules(params)).output;
}

Tensor fpo_forward(const Tensor& input, const FuzzyLayerParams& params) {
  if (params.kind != LayerKind::FPO) throw ConfigError("fpo_forward called with non-fpo parameters");
  params.validate();
  const FuzzyLayerParams p = with_canonical_rules(params);
  return mul(g_map(firing_strength(membership_matrix(input, p)), p), f_map(input, p));
}

Tensor fuzzy_forward(const Tensor& input, const FuzzyLayerParams& params) {
  return params.kind == LayerKind::FIO ? fio_forward(input, params) : fpo_forward(input, params);
}

Index fuzzy_output_size(LayerKind kind, Index in, Index kernel, Index stride) {
  if (kind == LayerKind::FIO) return in;
  return conv_output_size(in, kernel, stride, 0);
}

}  // namespace nf

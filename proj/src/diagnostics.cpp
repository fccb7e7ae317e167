#include "neurofuzzy/diagnostics.hpp"

#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/network.hpp"
#include "neurofuzzy/ops.hpp"
#include "neurofuzzy/tsk_reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace nf {

namespace {

Tensor random_tensor(Shape shape, double lo, double hi, std::mt19937_64& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

Index draw(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

double max_abs_diff(const Tensor& fused, const reference::Image& ref, Index n) {
  double worst = 0.0;
  const Index size = ref.channels * ref.height * ref.width;
  for (Index i = 0; i < size; ++i) {
    worst = std::max(worst, std::abs(fused[n * size + i] - ref.data[static_cast<std::size_t>(i)]));
  }
  return worst;
}

}  // namespace

FuzzyLayerParams random_fuzzy_params(LayerKind kind, Index rules, Index outputs, Index channels, Index kernel,
                                     Index stride, std::mt19937_64& rng) {
  FuzzyLayerParams p;
  p.kind = kind;
  p.rules = rules;
  p.outputs = outputs;
  p.channels = channels;
  p.kernel = kernel;
  p.stride = stride;
  const double area = static_cast<double>(channels * kernel * kernel);
  p.rule_filters = random_tensor({rules, channels, kernel, kernel}, -1.0 / area, 3.0 / area, rng, true);
  p.mix_filters = random_tensor({outputs, rules, 1, 1}, -1.0, 1.0, rng, true);
  p.mix_bias = random_tensor({outputs}, -0.5, 0.5, rng, true);
  p.out_filters = random_tensor({outputs, channels, kernel, kernel}, -1.0, 1.0, rng, true);
  p.out_bias = random_tensor({outputs}, -0.5, 0.5, rng, true);
  p.validate();
  return p;
}

OracleReport run_oracle_trials(int trials, std::uint64_t seed, const OracleTrialLimits& limits) {
  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  OracleReport report;
  for (int t = 0; t < trials; ++t) {
    for (LayerKind kind : {LayerKind::FIO, LayerKind::FPO}) {
      const Index s = draw(rng, 1, limits.max_kernel);
      const Index r = kind == LayerKind::FIO ? 1 : draw(rng, 1, limits.max_stride);
      const Index h = draw(rng, std::max<Index>(s, 2), limits.max_size);
      const Index w = draw(rng, std::max<Index>(s, 2), limits.max_size);
      const Index c = draw(rng, 1, limits.max_channels);
      const Index k = draw(rng, 1, limits.max_rules);
      const Index n = draw(rng, 1, limits.max_outputs);
      const FuzzyLayerParams params = random_fuzzy_params(kind, k, n, c, s, r, rng);
      const Tensor input = random_tensor({2, c, h, w}, -0.5, 1.0, rng, false);

      const Tensor fused = fuzzy_forward(input, params);
      const auto spec = reference::NaiveFuzzyLayerSpec::from_params(params, h, w);
      double diff = 0.0;
      for (Index i = 0; i < input.dim(0); ++i) {
        const auto image = reference::Image::from_tensor(input, i);
        const auto ref = kind == LayerKind::FIO ? reference::fio_reference(image, spec)
                                                : reference::fpo_reference(image, spec);
        if (ref.channels != fused.dim(1) || ref.height != fused.dim(2) || ref.width != fused.dim(3)) {
          diff = std::numeric_limits<double>::infinity();
        } else {
          diff = std::max(diff, max_abs_diff(fused, ref, i));
        }
      }
      if (kind == LayerKind::FIO) {
        ++report.fio_trials;
        report.fio_max_abs_diff = std::max(report.fio_max_abs_diff, diff);
      } else {
        ++report.fpo_trials;
        report.fpo_max_abs_diff = std::max(report.fpo_max_abs_diff, diff);
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

GradCheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed,
                                  const NetworkGradCheckOptions& options) {
  if (!spec.input) throw ConfigError("gradcheck needs an 'input channels=.. height=.. width=..' line in the spec");
  const int classes = static_cast<int>(spec.layers.back().units);
  const Network net = Network::build(spec, *spec.input, classes, seed);

  std::mt19937_64 rng(seed + 1);
  // Zero-initialized biases put padded cells exactly on the Leaky-ReLU kink.
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (const auto& p : net.parameters()) {
    if (p.tensor.rank() != 1) continue;
    Tensor t = p.tensor;
    for (Index i = 0; i < t.numel(); ++i) t[i] = bias(rng);
  }
  const Tensor images =
      random_tensor({options.batch, spec.input->channels, spec.input->height, spec.input->width}, 0.0, 1.0, rng, false);
  std::vector<int> labels;
  std::uniform_int_distribution<int> label(0, classes - 1);
  for (Index i = 0; i < options.batch; ++i) labels.push_back(label(rng));

  GradCheckOptions check = options.check;
  check.seed = seed;
  return grad_check([&] { return softmax_cross_entropy(net.forward(images, false, nullptr), labels); },
                    net.parameters(), check);
}

}  // namespace nf

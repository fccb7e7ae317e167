#include "neurofuzzy/diagnostics.hpp"
#include "neurofuzzy/errors.hpp"
#include "neurofuzzy/fuzzy_layers.hpp"
#include "neurofuzzy/ops.hpp"
#include "neurofuzzy/tsk_reference.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nf;
using nf::testing::random_tensor;

namespace {

// Layer with every parameter set to a constant, for hand-checkable cases.
FuzzyLayerParams constant_layer(LayerKind kind, Index rules, Index outputs, Index channels, Index kernel,
                                Index stride, double rule_value, double mix_value, double out_value) {
  FuzzyLayerParams p;
  p.kind = kind;
  p.rules = rules;
  p.outputs = outputs;
  p.channels = channels;
  p.kernel = kernel;
  p.stride = stride;
  p.rule_filters = Tensor({rules, channels, kernel, kernel}, rule_value, true);
  p.mix_filters = Tensor({outputs, rules, 1, 1}, mix_value, true);
  p.mix_bias = Tensor({outputs}, 0.0, true);
  p.out_filters = Tensor({outputs, channels, kernel, kernel}, out_value, true);
  p.out_bias = Tensor({outputs}, 0.0, true);
  return p;
}

}  // namespace

TEST(FuzzyLayers, KindNames) {
  EXPECT_EQ(to_string(LayerKind::FIO), "fio");
  EXPECT_EQ(to_string(LayerKind::FPO), "fpo");
  EXPECT_EQ(to_string(LayerKind::FL), "fl");
}

TEST(FuzzyLayers, FourByFourImageShapes) {
  // 4x4 image, one 2x2 fuzzy set at stride 1.
  std::mt19937_64 rng(1);
  const FuzzyLayerParams p = init_params(LayerKind::FIO, 1, 1, 1, 2, 1, rng);
  const Tensor image = random_tensor({1, 1, 4, 4}, rng, 0, 1);
  const FuzzyTrace t = fuzzy_forward_traced(image, p);
  EXPECT_EQ(t.membership.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(t.firing.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(t.padded.shape(), (Shape{1, 1, 5, 5}));
  EXPECT_EQ(t.g.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_EQ(t.f.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_EQ(t.output.shape(), (Shape{1, 1, 4, 4}));
}

TEST(FuzzyLayers, ZeroImageGivesZeroMembershipAndOutput) {
  std::mt19937_64 rng(2);
  const FuzzyLayerParams p = init_params(LayerKind::FIO, 3, 2, 2, 3, 1, rng);
  const Tensor zero({2, 2, 5, 5}, 0.0);
  EXPECT_TRUE((membership_matrix(zero, p).value() == 0.0).all());
  EXPECT_TRUE((fio_forward(zero, p).value() == 0.0).all());
}

TEST(FuzzyLayers, MembershipClipsAtOne) {
  // Filter entries sum to 3.2 on an all-ones image.
  FuzzyLayerParams p = constant_layer(LayerKind::FIO, 1, 1, 1, 2, 1, 0.8, 1.0, 1.0);
  const Tensor ones({1, 1, 4, 4}, 1.0);
  EXPECT_TRUE((membership_matrix(ones, p).value() == 1.0).all());
}

TEST(FuzzyLayers, FiringExamples) {
  Tensor m({1, 2, 1, 1}, {0.2, 0.6});
  Tensor f = firing_strength(m);
  EXPECT_NEAR(f[0], 0.25, 1e-7);
  EXPECT_NEAR(f[1], 0.75, 1e-7);
}

TEST(FuzzyLayers, GMapInteriorAndCorner) {
  FuzzyLayerParams p = constant_layer(LayerKind::FIO, 1, 1, 1, 2, 1, 0.1, 1.0, 1.0);
  const double c = 0.6;
  const Tensor firing({1, 1, 3, 3}, c);
  const Tensor g = g_map(firing, p);
  ASSERT_EQ(g.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_DOUBLE_EQ(g.at(0, 0, 1, 1), c);
  EXPECT_DOUBLE_EQ(g.at(0, 0, 0, 0), c / 4);
  EXPECT_DOUBLE_EQ(g.at(0, 0, 0, 1), c / 2);
}

TEST(FuzzyLayers, FMapIdentityFilter) {
  FuzzyLayerParams p = constant_layer(LayerKind::FIO, 1, 1, 1, 3, 1, 0.1, 1.0, 0.0);
  p.out_filters[4] = 1.0;  // centre tap
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 1, 5, 5}, rng, -1, 1);
  const Tensor f = f_map(x, p);
  for (Index i = 0; i < 25; ++i) {
    const double v = x[i];
    EXPECT_DOUBLE_EQ(f[i], v >= 0 ? v : 0.01 * v);
  }
}

TEST(FuzzyLayers, FpoOutputSize) {
  std::mt19937_64 rng(4);
  const FuzzyLayerParams p = init_params(LayerKind::FPO, 2, 3, 1, 2, 2, rng);
  EXPECT_EQ(fpo_forward(Tensor({1, 1, 4, 4}, 0.5), p).shape(), (Shape{1, 3, 2, 2}));
  EXPECT_EQ(fpo_forward(Tensor({2, 1, 7, 5}, 0.5), p).shape(), (Shape{2, 3, 3, 2}));
}

TEST(FuzzyLayers, DegeneratePoolingIsProportional) {
  FuzzyLayerParams p = constant_layer(LayerKind::FPO, 1, 1, 1, 1, 1, 1.0, 1.0, 1.0);
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 1, 4, 4}, rng, 0.1, 0.9);
  const Tensor y = fpo_forward(x, p);
  // membership = x, firing = x / (x + eps) ~ 1, g ~ 1, f = x
  for (Index i = 0; i < 16; ++i) EXPECT_NEAR(y[i], x[i], 1e-7);
}

TEST(FuzzyLayers, InitRanges) {
  std::mt19937_64 rng(6);
  const FuzzyLayerParams p = init_params(LayerKind::FIO, 8, 4, 1, 2, 1, rng);
  EXPECT_GE(p.rule_filters.value().minCoeff(), 0.0);
  EXPECT_LE(p.rule_filters.value().maxCoeff(), 0.5);
  EXPECT_TRUE((p.mix_bias.value() == 0.0).all());
  EXPECT_TRUE((p.out_bias.value() == 0.0).all());
  const double mix_bound = std::sqrt(6.0 / 12.0);
  EXPECT_LE(p.mix_filters.value().abs().maxCoeff(), mix_bound);

  std::mt19937_64 a(77), b(77);
  const FuzzyLayerParams pa = init_params(LayerKind::FPO, 3, 2, 2, 2, 2, a);
  const FuzzyLayerParams pb = init_params(LayerKind::FPO, 3, 2, 2, 2, 2, b);
  EXPECT_TRUE((pa.rule_filters.value() == pb.rule_filters.value()).all());
  EXPECT_TRUE((pa.out_filters.value() == pb.out_filters.value()).all());
}

TEST(FuzzyLayers, ConfigurationErrors) {
  std::mt19937_64 rng(7);
  FuzzyLayerParams p = init_params(LayerKind::FIO, 2, 2, 1, 3, 1, rng);
  EXPECT_THROW(fio_forward(Tensor({1, 1, 2, 2}), p), ConfigError);
  EXPECT_THROW(fio_forward(Tensor({1, 2, 4, 4}), p), ConfigError);
  p.stride = 2;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(init_params(LayerKind::FIO, 0, 1, 1, 1, 1, rng), ConfigError);
}

TEST(FuzzyLayers, MatchesReferenceOnSmallLayers) {
  std::mt19937_64 rng(8);
  {
    const FuzzyLayerParams p = random_fuzzy_params(LayerKind::FIO, 2, 3, 1, 2, 1, rng);
    const Tensor x = random_tensor({1, 1, 4, 4}, rng, 0, 1);
    const auto spec = reference::NaiveFuzzyLayerSpec::from_params(p, 4, 4);
    const auto ref = reference::fio_reference(reference::Image::from_tensor(x), spec);
    const Tensor y = fio_forward(x, p);
    for (Index i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], ref.data[static_cast<std::size_t>(i)], 1e-6);
  }
  {
    const FuzzyLayerParams p = random_fuzzy_params(LayerKind::FPO, 3, 2, 1, 2, 2, rng);
    const Tensor x = random_tensor({1, 1, 6, 6}, rng, 0, 1);
    const auto spec = reference::NaiveFuzzyLayerSpec::from_params(p, 6, 6);
    const auto ref = reference::fpo_reference(reference::Image::from_tensor(x), spec);
    const Tensor y = fpo_forward(x, p);
    ASSERT_EQ(y.numel(), static_cast<Index>(ref.data.size()));
    for (Index i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], ref.data[static_cast<std::size_t>(i)], 1e-6);
  }
}

TEST(FuzzyLayers, OracleTrialsAgree) {
  const OracleReport r = run_oracle_trials(100, 7);
  EXPECT_EQ(r.fio_trials, 100);
  EXPECT_EQ(r.fpo_trials, 100);
  EXPECT_LT(r.max_abs_diff(), 1e-6);
}

TEST(FuzzyLayers, GradientsThroughSingleLayers) {
  std::mt19937_64 rng(9);
  for (LayerKind kind : {LayerKind::FIO, LayerKind::FPO}) {
    const FuzzyLayerParams p = random_fuzzy_params(kind, 3, 2, 2, 2, kind == LayerKind::FIO ? 1 : 2, rng);
    const Tensor x = random_tensor({2, 2, 5, 5}, rng, 0, 1);
    const Tensor weights = random_tensor(fuzzy_forward(x, p).shape(), rng);
    GradCheckOptions opts;
    opts.seed = 3;
    const auto report = grad_check([&] { return sum(mul(fuzzy_forward(x, p), weights)); },
                                   p.named_parameters(std::string(to_string(kind)) + "."), opts);
    for (const auto& e : report.params) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
  }
}

// Randomized invariant checks for the fuzzy layers and the TSK evaluator.

#include "neurofuzzy/diagnostics.hpp"
#include "neurofuzzy/fuzzy_layers.hpp"
#include "neurofuzzy/ops.hpp"
#include "neurofuzzy/tsk_reference.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace nf;
using nf::testing::random_tensor;

namespace {

Index draw(std::mt19937_64& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

struct RandomLayer {
  FuzzyLayerParams params;
  Tensor input;
};

RandomLayer random_layer(std::mt19937_64& rng, LayerKind kind) {
  const Index s = draw(rng, 1, 3);
  const Index r = kind == LayerKind::FIO ? 1 : draw(rng, 1, 3);
  const Index c = draw(rng, 1, 3);
  RandomLayer l;
  l.params = random_fuzzy_params(kind, draw(rng, 1, 5), draw(rng, 1, 4), c, s, r, rng);
  l.input = random_tensor({draw(rng, 1, 2), c, draw(rng, s, 9), draw(rng, s, 9)}, rng, -1.0, 2.0);
  return l;
}

}  // namespace

TEST(Properties, MembershipsStayInUnitInterval) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 250; ++trial) {
    const auto kind = trial % 2 ? LayerKind::FIO : LayerKind::FPO;
    const RandomLayer l = random_layer(rng, kind);
    const Array& m = membership_matrix(l.input, l.params).value();
    ASSERT_GE(m.minCoeff(), 0.0) << "trial " << trial;
    ASSERT_LE(m.maxCoeff(), 1.0) << "trial " << trial;
  }
}

TEST(Properties, FiringSumsMatchClippedMass) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 250; ++trial) {
    const RandomLayer l = random_layer(rng, trial % 2 ? LayerKind::FIO : LayerKind::FPO);
    const Tensor m = membership_matrix(l.input, l.params);
    const Tensor f = firing_strength(m);
    const Index n = m.dim(0), k = m.dim(1), plane = m.dim(2) * m.dim(3);
    for (Index b = 0; b < n; ++b) {
      for (Index p = 0; p < plane; ++p) {
        double s = 0.0, total = 0.0;
        for (Index r = 0; r < k; ++r) {
          s += m[(b * k + r) * plane + p];
          total += f[(b * k + r) * plane + p];
        }
        ASSERT_NEAR(total, s / (s + kFiringEpsilon), 1e-9) << "trial " << trial;
        ASSERT_LE(total, 1.0 + 1e-15);
      }
    }
  }
}

TEST(Properties, FioPreservesSpatialDims) {
  std::mt19937_64 rng(303);
  int cases = 0;
  for (Index h = 2; h <= 10; ++h)
    for (Index w = 2; w <= 10; ++w)
      for (Index s = 1; s <= 3; ++s) {
        if (s > h || s > w) continue;
        const FuzzyLayerParams p = random_fuzzy_params(LayerKind::FIO, 2, 2, 1, s, 1, rng);
        const Tensor y = fio_forward(random_tensor({1, 1, h, w}, rng, 0, 1), p);
        ASSERT_EQ(y.shape(), (Shape{1, 2, h, w}));
        ++cases;
      }
  EXPECT_GE(cases, 200);
}

TEST(Properties, FpoFollowsPoolingFormula) {
  std::mt19937_64 rng(404);
  int cases = 0;
  for (Index h = 2; h <= 10; ++h)
    for (Index w = 2; w <= 10; ++w)
      for (Index s = 1; s <= 3; ++s)
        for (Index r = 1; r <= 3; ++r) {
          if (s > h || s > w) continue;
          const FuzzyLayerParams p = random_fuzzy_params(LayerKind::FPO, 2, 3, 1, s, r, rng);
          const Tensor y = fpo_forward(random_tensor({1, 1, h, w}, rng, 0, 1), p);
          ASSERT_EQ(y.shape(), (Shape{1, 3, (h - s) / r + 1, (w - s) / r + 1}));
          ++cases;
        }
  EXPECT_GE(cases, 600);
}

TEST(Properties, RulePermutationLeavesOutputUnchanged) {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 200; ++trial) {
    const auto kind = trial % 2 ? LayerKind::FIO : LayerKind::FPO;
    const RandomLayer l = random_layer(rng, kind);
    const FuzzyLayerParams& p = l.params;

    std::vector<Index> perm(static_cast<std::size_t>(p.rules));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);

    FuzzyLayerParams q = p;
    q.rule_filters = permute_axis(p.rule_filters, 0, perm).detach();
    q.mix_filters = permute_axis(p.mix_filters, 1, perm).detach();

    const Array a = fuzzy_forward(l.input, p).value();
    const Array b = fuzzy_forward(l.input, q).value();
    ASSERT_TRUE((a == b).all()) << "trial " << trial << ", max diff " << (a - b).abs().maxCoeff();
  }
}

TEST(Properties, TskScaleInvarianceAndConvexity) {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> unit(0.0, 1.0), coef(-3.0, 3.0);
  for (int trial = 0; trial < 250; ++trial) {
    const std::size_t dim = static_cast<std::size_t>(draw(rng, 1, 4));
    reference::TskRuleSet set;
    for (Index k = 0, K = draw(rng, 1, 6); k < K; ++k) {
      reference::TskRule rule;
      for (std::size_t i = 0; i < dim; ++i) {
        rule.premises.push_back({coef(rng), 0.5 + unit(rng)});
        rule.coeffs.push_back(coef(rng));
      }
      rule.intercept = coef(rng);
      set.rules.push_back(rule);
    }
    std::vector<double> x(dim);
    for (double& v : x) v = coef(rng) / 2;

    std::vector<double> p, f;
    for (const auto& r : set.rules) {
      p.push_back(r.strength(x));
      f.push_back(r.consequent(x));
    }
    const double y = reference::tsk_eval(set, x);
    EXPECT_DOUBLE_EQ(y, reference::tsk_combine(p, f));

    const double c = std::exp(coef(rng) * 3);
    std::vector<double> scaled(p);
    for (double& v : scaled) v *= c;
    ASSERT_NEAR(reference::tsk_combine(scaled, f), y, 1e-12 * std::max(1.0, std::abs(y))) << "trial " << trial;

    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const double slack = 1e-12 * std::max(1.0, std::abs(y));
    ASSERT_GE(y, *lo - slack) << "trial " << trial;
    ASSERT_LE(y, *hi + slack) << "trial " << trial;
  }
}

TEST(Properties, ConvIsLinearInInput) {
  std::mt19937_64 rng(707);
  for (int trial = 0; trial < 100; ++trial) {
    const Index c = draw(rng, 1, 3), k = draw(rng, 1, 3), s = draw(rng, 1, 3);
    const Tensor w = random_tensor({k, c, s, s}, rng);
    const Tensor a = random_tensor({1, c, 6, 5}, rng);
    const Tensor b = random_tensor({1, c, 6, 5}, rng);
    const Index stride = draw(rng, 1, 2), pad = draw(rng, 0, 1);
    const Array lhs = conv2d(add(a, b), w, stride, pad).value();
    const Array rhs = conv2d(a, w, stride, pad).value() + conv2d(b, w, stride, pad).value();
    ASSERT_LT((lhs - rhs).abs().maxCoeff(), 1e-12);
  }
}
